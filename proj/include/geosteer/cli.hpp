#pragma once

#include "geosteer/config.hpp"

namespace geosteer::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPartial = 3;
inline constexpr int kExitIo = 4;

/// Build a factorizable model from [synthesize] and write the SGM model,
/// scheme JSON, and exact probe JSON.
int cmd_synthesize(const ConfigFile& config);

/// Trace a primal or dual interpolation as CSV (top-k probabilities per t,
/// remainder as "others").
int cmd_interpolate(const ConfigFile& config);

/// Steering sweep over a file of start points: one trace CSV per
/// (start, method), binned summaries per (method, metric), and a manifest.
int cmd_steer(const ConfigFile& config);

/// Per-step dual-step cosine and probing-assumption diagnostics for both
/// methods.
int cmd_diagnose(const ConfigFile& config);

/// Recompute metric columns of an existing trace CSV (requires full lambda
/// values in the trace) under the configured metric settings.
int cmd_metrics(const ConfigFile& config);

} // namespace geosteer::cli
