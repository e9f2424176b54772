// Placeholder entry point; subcommands are wired up in a later pass.
int main() { return 0; }
