#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "agpad/errors.hpp"

namespace agpad {

/// Paired live / PA score lists, each score in [0,1]. The decision rule used
/// everywhere: classify PA when score >= threshold.
struct ScoreSet {
  std::vector<double> live;
  std::vector<double> pa;
};

inline void validate(const ScoreSet& scores) {
  if (scores.live.empty() || scores.pa.empty()) {
    throw DataError("score set needs both live and PA scores");
  }
  for (double s : scores.live) {
    if (!std::isfinite(s)) throw NumericError("non-finite live score");
  }
  for (double s : scores.pa) {
    if (!std::isfinite(s)) throw NumericError("non-finite PA score");
  }
}

struct RocPoint {
  double threshold;
  double fdr;  // fraction of live scores >= threshold (same as BPCER)
  double tdr;  // fraction of PA scores >= threshold (1 - APCER)
};

/// Threshold sweep over all distinct scores, descending, preceded by an
/// above-everything sentinel so the curve starts at (0,0) and ends at (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

inline RocCurve roc(const ScoreSet& scores) {
  validate(scores);
  std::vector<double> live = scores.live;
  std::vector<double> pa = scores.pa;
  std::sort(live.begin(), live.end());
  std::sort(pa.begin(), pa.end());

  std::vector<double> thresholds;
  thresholds.reserve(live.size() + pa.size() + 1);
  thresholds.push_back(std::numeric_limits<double>::infinity());
  {
    std::vector<double> all(live);
    all.insert(all.end(), pa.begin(), pa.end());
    std::sort(all.begin(), all.end(), std::greater<double>());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    thresholds.insert(thresholds.end(), all.begin(), all.end());
  }

  auto count_ge = [](const std::vector<double>& sorted, double t) {
    return static_cast<double>(
        sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };

  RocCurve curve;
  curve.points.reserve(thresholds.size());
  for (double t : thresholds) {
    curve.points.push_back(
        RocPoint{t, count_ge(live, t) / static_cast<double>(live.size()),
                 count_ge(pa, t) / static_cast<double>(pa.size())});
  }
  return curve;
}

struct TdrAtFdr {
  double tdr = 0.0;
  double threshold = 0.0;
  // false when the target is finer than the live-set resolution (1/|live|),
  // i.e. the operating point cannot be measured at this sample size
  bool supported = true;
};

/// Maximum TDR over thresholds whose FDR stays within the target; ties go to
/// the largest (most conservative) threshold.
inline TdrAtFdr tdr_at_fdr(const ScoreSet& scores, double fdr_target) {
  if (!(fdr_target >= 0.0) || fdr_target >= 1.0) {
    throw ConfigError("FDR target must lie in [0, 1)");
  }
  RocCurve curve = roc(scores);
  TdrAtFdr best;
  best.tdr = -1.0;
  for (const auto& p : curve.points) {
    if (p.fdr > fdr_target) continue;
    if (p.tdr > best.tdr) {
      best.tdr = p.tdr;
      best.threshold = p.threshold;
    }
  }
  best.supported = fdr_target == 0.0 ||
                   fdr_target >= 1.0 / static_cast<double>(scores.live.size());
  return best;
}

struct ErrorRates {
  double apcer;  // fraction of PA scores below threshold
  double bpcer;  // fraction of live scores at or above threshold
};

/// APCER/BPCER at a fixed threshold (0.5 per the evaluation protocol).
/// At any threshold, BPCER == FDR and APCER == 1 - TDR.
inline ErrorRates apcer_bpcer(const ScoreSet& scores, double threshold = 0.5) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("threshold must lie in [0, 1]");
  }
  validate(scores);
  std::int64_t pa_miss = 0, live_hit = 0;
  for (double s : scores.pa) pa_miss += (s < threshold) ? 1 : 0;
  for (double s : scores.live) live_hit += (s >= threshold) ? 1 : 0;
  return ErrorRates{
      static_cast<double>(pa_miss) / static_cast<double>(scores.pa.size()),
      static_cast<double>(live_hit) / static_cast<double>(scores.live.size())};
}

inline void write_roc_csv(const std::string& path, const RocCurve& curve) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "threshold,fdr,tdr\n";
  char buf[128];
  for (const auto& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.threshold, p.fdr,
                  p.tdr);
    os << buf;
  }
}

struct ScoreRow {
  std::string path;
  int label;
  double score;
};

inline void write_scores_csv(const std::string& path,
                             const std::vector<ScoreRow>& rows) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "path,label,score\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%s,%.9g\n", r.label == 0 ? "live" : "pa",
                  r.score);
    os << r.path << buf;
  }
}

/// Human-readable operating-point block: TDR at the requested FDR targets
/// plus APCER/BPCER at the fixed threshold.
inline std::string summary_text(const ScoreSet& scores,
                                const std::vector<double>& fdr_targets,
                                double threshold) {
  std::string out;
  char buf[160];
  for (double target : fdr_targets) {
    TdrAtFdr r = tdr_at_fdr(scores, target);
    if (r.supported) {
      std::snprintf(buf, sizeof(buf),
                    "TDR @ %.4g%% FDR: %.4f (threshold %.6g)\n", target * 100.0,
                    r.tdr, r.threshold);
    } else {
      std::snprintf(buf, sizeof(buf),
                    "TDR @ %.4g%% FDR: unsupported at this sample size "
                    "(%zu live samples resolve %.4g%% at best)\n",
                    target * 100.0, scores.live.size(),
                    100.0 / static_cast<double>(scores.live.size()));
    }
    out += buf;
  }
  ErrorRates er = apcer_bpcer(scores, threshold);
  std::snprintf(buf, sizeof(buf), "APCER @ %.2g: %.4f\nBPCER @ %.2g: %.4f\n",
                threshold, er.apcer, threshold, er.bpcer);
  out += buf;
  return out;
}

}  // namespace agpad
