#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "liflow/checkpoint.hpp"
#include "liflow/cloud_io.hpp"
#include "liflow/config.hpp"
#include "liflow/dataset.hpp"
#include "liflow/metrics.hpp"
#include "liflow/sampler.hpp"
#include "liflow/train.hpp"

namespace liflow {

inline constexpr const char* kCheckpointName = "checkpoint.bin";
inline constexpr const char* kTrainLogName = "train_log.tsv";
inline constexpr const char* kRunConfigName = "run.cfg";

namespace detail {

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error("cannot create directory '" + dir.string() + "'");
  }
}

}  // namespace detail

/// Writes the scene/scan dataset described by `config`.
inline std::vector<ManifestRow> run_make_data(const RunConfig& config, std::ostream& log) {
  validate(config);
  const auto rows = make_dataset(config);
  log << "wrote " << rows.size() << " cases to " << config.data_dir << '\n';
  return rows;
}

struct TrainSummary {
  std::size_t steps = 0;
  LossReport last_loss;
};

/// Trains on `config.data_dir`, writing the checkpoint, a TSV loss log and the
/// resolved config under `config.out_dir`. A diverging step throws and leaves
/// the last periodic checkpoint in place.
inline TrainSummary run_train(const RunConfig& config, std::ostream& log) {
  namespace fs = std::filesystem;
  validate(config);
  const auto cases = load_dataset(config.data_dir);
  const fs::path out(config.out_dir);
  detail::ensure_directory(out);
  {
    std::ofstream cfg(out / kRunConfigName);
    if (!cfg) throw Error("cannot write '" + (out / kRunConfigName).string() + "'");
    write_config(cfg, config);
  }
  std::ofstream loss_log(out / kTrainLogName);
  if (!loss_log) throw Error("cannot write '" + (out / kTrainLogName).string() + "'");
  loss_log << "step\tepoch\tnfm\tcdm\ttotal\n";

  const VectorFieldNet net(config.field);
  Checkpoint ck{config.field, net.initial_state(), config.fresh_optimizer(net.parameter_count())};
  const fs::path ck_path = out / kCheckpointName;

  TrainSummary summary;
  auto on_step = [&](const StepLog& s) {
    using detail::format_number;
    loss_log << s.step << '\t' << s.epoch << '\t' << format_number(s.loss.nfm) << '\t'
             << format_number(s.loss.cdm) << '\t' << format_number(s.loss.total) << '\n';
    log << "step=" << s.step << " epoch=" << s.epoch << " nfm=" << format_number(s.loss.nfm)
        << " cdm=" << format_number(s.loss.cdm) << " total=" << format_number(s.loss.total)
        << '\n';
    if (!std::isfinite(s.loss.total) || !ck.model.all_finite()) {
      throw Error("non-finite loss at step " + std::to_string(s.step));
    }
    summary.steps = s.step;
    summary.last_loss = s.loss;
    if (config.checkpoint_every != 0 && s.step % config.checkpoint_every == 0) {
      save_checkpoint(ck, ck_path);
    }
  };
  try {
    train(net, ck.model, ck.optimizer, cases, config.train_config(), on_step);
  } catch (const Error& e) {
    loss_log.flush();
    const bool kept = fs::exists(ck_path);
    throw Error(std::string("training stopped: ") + e.what() +
                (kept ? "; last good checkpoint kept at '" + ck_path.string() + "'"
                      : "; no checkpoint written"));
  }
  save_checkpoint(ck, ck_path);
  log << "checkpoint " << ck_path.string() << " after " << summary.steps << " steps\n";
  return summary;
}

struct CompleteOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path scan;
  std::filesystem::path output;
  std::optional<std::filesystem::path> trajectory_dir;
};

/// Completes one scan. With a trajectory directory, every intermediate state
/// X_t is written as `step_<k>.ply`.
inline Trajectory run_complete(const RunConfig& config, const CompleteOptions& opts,
                               std::ostream& log) {
  validate(config);
  const Checkpoint ck = load_checkpoint(opts.checkpoint);
  const VectorFieldNet net(ck.field);
  const PointCloud scan = read_cloud(opts.scan);
  require(!scan.empty(), "'" + opts.scan.string() + "' holds no points");
  SamplerConfig sampler = config.sampler;
  sampler.record_trajectory = opts.trajectory_dir.has_value();
  const Trajectory traj = complete_scene(net, ck.model, scan, config.k,
                                         {config.noise_scale, config.noise_seed}, sampler);
  write_cloud(traj.final_state, opts.output);
  if (opts.trajectory_dir) {
    detail::ensure_directory(*opts.trajectory_dir);
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%03zu.ply", k);
      write_cloud(traj.states[k], *opts.trajectory_dir / name, CloudFormat::kPlyBinary);
    }
  }
  log << "completed " << scan.size() << " scan points into " << traj.final_state.size()
      << " points: " << opts.output.string() << '\n';
  return traj;
}

/// Scores predictions against ground truth pairwise and prints a table with a
/// final mean row. Per-pair reports go to `report_dir` when given.
inline std::vector<EvalReport> run_eval(const RunConfig& config,
                                        const std::vector<std::filesystem::path>& predictions,
                                        const std::vector<std::filesystem::path>& references,
                                        const std::optional<std::filesystem::path>& report_dir,
                                        std::ostream& out) {
  validate(config);
  require(!predictions.empty(), "no predictions given");
  require(predictions.size() == references.size(),
          "got " + std::to_string(predictions.size()) + " predictions but " +
              std::to_string(references.size()) + " references");
  if (report_dir) detail::ensure_directory(*report_dir);
  std::vector<EvalReport> reports;
  std::vector<std::pair<std::string, EvalReport>> rows;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const PointCloud pred = read_cloud(predictions[i]);
    const PointCloud gt = read_cloud(references[i]);
    EvalReport r;
    try {
      r = eval_all(pred, gt, config.eval);
    } catch (const Error& e) {
      throw Error(predictions[i].string() + ": " + e.what());
    }
    std::string label = predictions[i].stem().string();
    if (report_dir) {
      const auto path = *report_dir / (label + ".report");
      std::ofstream os(path);
      if (!os) throw Error("cannot write '" + path.string() + "'");
      write_report(os, r);
    }
    reports.push_back(r);
    rows.emplace_back(std::move(label), r);
  }
  rows.emplace_back("mean", mean_report(reports));
  write_table(out, rows);
  return reports;
}

}  // namespace liflow
