// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "liflow/liflow.hpp"
#include "oracles.hpp"

using namespace liflow;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  Outcome outcome(const std::string& summary) const {
    if (failed_ == 0) return {true, summary};
    std::string d = summary + "; " + std::to_string(failed_) + " failed check(s):";
    for (const auto& f : failures_) d += " [" + f + "]";
    return {false, d};
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 ------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> count(1, 256);
  Check check;
  double worst_cd = 0.0;
  const int pairs = 120;
  for (int trial = 0; trial < pairs; ++trial) {
    const PointCloud a = oracle::random_cloud(rng, count(rng));
    PointCloud b = oracle::random_cloud(rng, count(rng));
    // Every fourth pair on a coarse lattice so that exact ties are exercised.
    if (trial % 4 == 3) {
      for (auto& p : b) {
        p = {std::round(p.x * 2) / 2, std::round(p.y * 2) / 2, std::round(p.z * 2) / 2};
      }
    }
    const std::string tag = "pair " + std::to_string(trial);
    check.expect(nearest_neighbor_map(a, b) == oracle::nn_map(a, b), tag + " NN map a->b");
    check.expect(nearest_neighbor_map(b, a) == oracle::nn_map(b, a), tag + " NN map b->a");

    const double ref_sum = oracle::chamfer_sum(a, b);
    const double ref_mean = oracle::chamfer_mean(a, b);
    const double e_sum = std::abs(chamfer_distance(a, b) - ref_sum) / std::max(ref_sum, 1e-300);
    const double e_mean = std::abs(eval_cd(a, b) - ref_mean) / std::max(ref_mean, 1e-300);
    worst_cd = std::max({worst_cd, e_sum, e_mean});
    check.expect(e_sum <= 1e-9 && e_mean <= 1e-9, tag + " chamfer");

    for (double res : {0.5, 0.2, 0.1}) {
      check.expect(eval_voxel_iou(a, b, res) == oracle::iou(a, b, res), tag + " IoU");
    }
    const Extent2D ext{-1, 1, -1, 1};
    const BevHistogram h = bev_histogram(a, 0.25, ext);
    const auto ref = oracle::bev_counts(a, 0.25, -1, 1, -1, 1);
    std::uint64_t nonzero = 0;
    bool same = h.dropped == 0;
    for (std::size_t ix = 0; ix < h.nx; ++ix) {
      for (std::size_t iy = 0; iy < h.ny; ++iy) {
        const auto it = ref.find({static_cast<long long>(ix), static_cast<long long>(iy)});
        const std::uint64_t expect = it == ref.end() ? 0 : it->second;
        same = same && h.at(ix, iy) == expect;
        nonzero += h.at(ix, iy) != 0;
      }
    }
    check.expect(same && nonzero == ref.size(), tag + " BEV histogram");
  }
  const double elapsed = seconds_since(t0);
  check.expect(elapsed < 30.0, "runtime " + fmt("%.1f s", elapsed));
  return check.outcome(std::to_string(pairs) + " pairs, worst chamfer rel err " +
                       fmt("%.1e", worst_cd) + ", " + fmt("%.2f s", elapsed));
}

// 2 ------------------------------------------------------------------------

Outcome flow_algebra() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> time(0.0, 1.0);
  Check check;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const PointCloud x0 = oracle::random_cloud(rng, 64);
    const PointCloud x1 = oracle::random_cloud(rng, 200);
    const auto map = oracle::nn_map(x0, x1);
    FlowSample reference;
    for (int j = 0; j < 5; ++j) {
      const double t = j == 0 ? 0.0 : (j == 4 ? 1.0 : time(rng));
      const FlowSample s = nn_flow(x0, x1, t);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        const double err = norm(s.x_t[i] + (1.0 - t) * s.v_target[i] - x1[map[i]]);
        worst = std::max(worst, err);
      }
      if (j == 0) reference = s;
      check.expect(s.v_target == reference.v_target,
                   "trial " + std::to_string(trial) + " target velocity depends on t");
    }
  }
  check.expect(worst <= 1e-12, "endpoint error " + fmt("%.1e", worst));
  return check.outcome("50 cloud pairs x 5 times, worst endpoint error " + fmt("%.1e", worst));
}

// 3 ------------------------------------------------------------------------

Outcome euler_exactness() {
  std::mt19937_64 rng(1003);
  Check check;
  double worst_target = 0.0, worst_spread = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud x0 = oracle::random_cloud(rng, 128);
    const PointCloud x1 = oracle::random_cloud(rng, 96);
    const auto map = oracle::nn_map(x0, x1);
    VectorList frozen;
    for (std::size_t i = 0; i < x0.size(); ++i) frozen.push_back(x1[map[i]] - x0[i]);
    const FieldFunction field = [&](double, const PointCloud&) { return frozen; };
    std::vector<PointCloud> finals;
    for (std::size_t steps : {1u, 2u, 5u, 10u}) {
      finals.push_back(euler_integrate(field, x0, steps).final_state);
      for (std::size_t i = 0; i < x0.size(); ++i) {
        worst_target = std::max(worst_target, norm(finals.back()[i] - x1[map[i]]));
        worst_spread = std::max(worst_spread, norm(finals.back()[i] - finals.front()[i]));
      }
    }
  }
  check.expect(worst_target <= 1e-10, "target error " + fmt("%.1e", worst_target));
  check.expect(worst_spread <= 1e-12, "step-count spread " + fmt("%.1e", worst_spread));
  return check.outcome("steps {1,2,5,10}, worst target error " + fmt("%.1e", worst_target) +
                       ", worst spread " + fmt("%.1e", worst_spread));
}

// 4 ------------------------------------------------------------------------

Outcome cfg_identities() {
  std::mt19937_64 rng(1004);
  Check check;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    FieldConfig fc;
    fc.hidden_widths = {32, 32};
    fc.seed = seed;
    fc.zero_init_output = false;
    const VectorFieldNet net(fc);
    ModelState state = net.initial_state();
    std::normal_distribution<double> jitter(0.0, 0.05);
    for (auto& w : state.ema_weights) w += jitter(rng);
    // Go through the on-disk format so the checkpoint is the one that is tested.
    std::stringstream bytes;
    save_checkpoint({fc, state, OptimizerState::for_size(net.parameter_count())}, bytes);
    const Checkpoint ck = load_checkpoint(bytes);
    const VectorFieldNet loaded(ck.field);

    const PointCloud x = oracle::random_cloud(rng, 100);
    const PointCloud scan = oracle::random_cloud(rng, 24);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    for (const auto* params : {&ck.model.weights, &ck.model.ema_weights}) {
      const VectorList cond = loaded.forward(*params, t, x, Condition::of(scan));
      const VectorList uncond = loaded.forward(*params, t, x, Condition::null());
      const std::string tag = "checkpoint " + std::to_string(seed);
      check.expect(guided_field(loaded, *params, t, x, scan, 1.0) == cond, tag + " w=1");
      check.expect(guided_field(loaded, *params, t, x, scan, 0.0) == uncond, tag + " w=0");
      check.expect(cond != uncond, tag + " condition has no effect");
    }
  }
  return check.outcome("10 checkpoints, raw and EMA weights, bit-exact at w=0 and w=1");
}

// 5 ------------------------------------------------------------------------

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1005);
  Check check;
  double worst = 0.0;
  const int instances = 24;
  for (int trial = 0; trial < instances; ++trial) {
    FieldConfig fc;
    fc.hidden_widths = {16, 16};
    fc.time_embed_dim = 8;
    fc.zero_init_output = false;
    fc.seed = 500 + static_cast<std::uint64_t>(trial);
    const Activation acts[] = {Activation::kSilu, Activation::kTanh, Activation::kRelu};
    fc.activation = acts[trial % 3];
    const VectorFieldNet net(fc);
    const auto params = net.initial_parameters();
    const PointCloud scan = oracle::random_cloud(rng, 16);
    const PointCloud x0 = oracle::random_cloud(rng, 32 + trial % 33);
    const PointCloud x1 = oracle::random_cloud(rng, 64);
    const double t = std::uniform_real_distribution<double>(0, 1)(rng);
    const FlowSample s = nn_flow(x0, x1, t, trial % 2 ? Condition::of(scan) : Condition::null());
    ObjectiveConfig obj;  // weights 1 and 0.1
    std::vector<BatchItem> batch{
        {s.t, &s.x_t, s.condition, [&](const VectorList& u) { return total_loss_with_grad(s, u, obj); }}};
    const GradientResult g = compute_gradient(net, params, batch);
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& p) {
          return total_loss_with_grad(s, net.forward(p, s.t, s.x_t, s.condition), obj).report.total;
        },
        params, 1e-6);
    const double err = oracle::relative_error(g.grad, fd);
    worst = std::max(worst, err);
    check.expect(err < 1e-4, "instance " + std::to_string(trial) + " rel err " + fmt("%.1e", err));
  }
  const double elapsed = seconds_since(t0);
  check.expect(elapsed < 60.0, "runtime " + fmt("%.1f s", elapsed));
  return check.outcome(std::to_string(instances) + " instances, worst rel err " +
                       fmt("%.1e", worst) + ", " + fmt("%.2f s", elapsed));
}

// 6 and 7 --------------------------------------------------------------------

// Toy scale shared by the completion and ablation checks.
struct Toy {
  std::size_t train_cases = 48;
  std::size_t test_cases = 16;
  std::size_t k = 10;
  double noise_scale = 0.25;
  std::size_t steps = 5000;
  std::vector<std::size_t> hidden = {64, 64, 64};
  double learning_rate = 3e-3;
  std::size_t batch_size = 1;
  double ema_decay = 0.995;
  double guidance_weight = 2.0;
  bool use_ema = true;
};

struct ToyData {
  std::vector<TrainingCase> train;
  std::vector<SceneCase> test;
};

ToyData make_toy_data(const Toy& toy) {
  const SceneDistribution dist;  // 512-point scans
  ToyData d;
  for (std::size_t i = 0; i < toy.train_cases; ++i) {
    const SceneCase c = make_case(dist, derive_seed(1, i));
    d.train.push_back({c.scene, c.scan});
  }
  for (std::size_t i = 0; i < toy.test_cases; ++i) d.test.push_back(make_case(dist, derive_seed(2, i)));
  return d;
}

struct ToyModel {
  VectorFieldNet net;
  ModelState state;
  double train_seconds = 0.0;
  std::vector<double> losses;  // total loss per step
};

// Mean total loss over steps [from, to), 0-based.
double window_mean(const std::vector<double>& losses, std::size_t from, std::size_t to) {
  to = std::min(to, losses.size());
  if (from >= to) return std::nan("");
  double s = 0.0;
  for (std::size_t i = from; i < to; ++i) s += losses[i];
  return s / static_cast<double>(to - from);
}

ToyModel train_toy(const Toy& toy, const ToyData& data, double lambda_cdm) {
  FieldConfig fc;
  fc.hidden_widths = toy.hidden;
  ToyModel m{VectorFieldNet(fc), {}, 0.0, {}};
  m.state = m.net.initial_state();
  OptimizerState opt = OptimizerState::for_size(m.net.parameter_count());
  opt.learning_rate = toy.learning_rate;
  TrainConfig tc;
  tc.epochs = toy.steps;  // capped by max_steps
  tc.max_steps = toy.steps;
  tc.batch_size = toy.batch_size;
  tc.k = toy.k;
  tc.noise_scale = toy.noise_scale;
  tc.ema_decay = toy.ema_decay;
  tc.objective.weights.lambda_cdm = lambda_cdm;
  const auto t0 = std::chrono::steady_clock::now();
  train(m.net, m.state, opt, data.train, tc, [&](const StepLog& l) { m.losses.push_back(l.loss.total); });
  m.train_seconds = seconds_since(t0);
  return m;
}

struct ToyScores {
  double baseline_cd = 0.0, baseline_iou = 0.0;
  double cd = 0.0, iou = 0.0;
};

ToyScores score_toy(const Toy& toy, const ToyData& data, const ToyModel& m) {
  ToyScores s;
  SamplerConfig sc;
  sc.guidance_weight = toy.guidance_weight;
  sc.use_ema = toy.use_ema;
  for (std::size_t i = 0; i < data.test.size(); ++i) {
    const SceneCase& c = data.test[i];
    const NoiseConfig noise{toy.noise_scale, derive_seed(3, i)};
    const PointCloud start = init_noisy(c.scan, toy.k, noise);
    const PointCloud done = complete_scene(m.net, m.state, c.scan, toy.k, noise, sc).final_state;
    s.baseline_cd += eval_cd(start, c.scene);
    s.baseline_iou += eval_voxel_iou(start, c.scene, 0.5);
    s.cd += eval_cd(done, c.scene);
    s.iou += eval_voxel_iou(done, c.scene, 0.5);
  }
  const double n = static_cast<double>(data.test.size());
  s.baseline_cd /= n;
  s.baseline_iou /= n;
  s.cd /= n;
  s.iou /= n;
  return s;
}

struct ToyRun {
  Toy toy;
  ToyData data;
  ToyScores full;
  double seconds = 0.0;
};

Outcome toy_completion(ToyRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  run.data = make_toy_data(run.toy);
  const ToyModel m = train_toy(run.toy, run.data, 0.1);
  run.full = score_toy(run.toy, run.data, m);
  run.seconds = seconds_since(t0);
  const ToyScores& s = run.full;
  // Reported only: loss over the first and the 2000th hundred steps.
  const double early = window_mean(m.losses, 0, 100), late = window_mean(m.losses, 1900, 2000);
  Check check;
  check.expect(s.cd <= 0.5 * s.baseline_cd, "CD ratio " + fmt("%.3f", s.cd / s.baseline_cd));
  check.expect(s.iou >= 1.5 * s.baseline_iou, "IoU@0.5 gain " + fmt("%.3f", s.iou / s.baseline_iou));
  check.expect(run.seconds < 600.0, "runtime " + fmt("%.0f s", run.seconds));
  return check.outcome("CD " + fmt("%.4f", s.cd) + " m vs baseline " + fmt("%.4f", s.baseline_cd) +
                       " (ratio " + fmt("%.3f", s.cd / s.baseline_cd) + "), IoU@0.5 " +
                       fmt("%.3f", s.iou) + " vs " + fmt("%.3f", s.baseline_iou) + " (x" +
                       fmt("%.3f", s.iou / s.baseline_iou) + "), loss over steps 1-100 " +
                       fmt("%.4f", early) + " vs 1901-2000 " + fmt("%.4f", late) + " (-" +
                       fmt("%.0f%%", 100.0 * (1.0 - late / early)) + "), " +
                       fmt("%.0f s", run.seconds));
}

Outcome ablation_direction(const ToyRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const ToyModel m = train_toy(run.toy, run.data, 0.0);
  const ToyScores nfm_only = score_toy(run.toy, run.data, m);
  Check check;
  check.expect(run.full.cd <= nfm_only.cd, "weights (1, 0.1) CD above (1, 0) CD");
  return check.outcome("CD with (1, 0.1) " + fmt("%.4f", run.full.cd) + " m, with (1, 0) " +
                       fmt("%.4f", nfm_only.cd) + " m, " + fmt("%.0f s", seconds_since(t0)));
}

// 8 ------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every file under `dir`, keyed by relative path.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "liflow_acceptance";
  fs::remove_all(root);
  Check check;
  std::vector<std::vector<std::pair<std::string, std::string>>> runs;
  // The same config twice into the same place, wiping everything in between.
  for (int rerun = 0; rerun < 2; ++rerun) {
    fs::remove_all(root);
    const fs::path dir = root;
    RunConfig c;
    c.data_dir = (dir / "data").string();
    c.out_dir = (dir / "run").string();
    c.cases = 4;
    c.scenes.scan_points = 128;
    c.scenes.scene_points = 1280;
    c.noise_scale = 0.25;
    c.field.hidden_widths = {32, 32};
    c.epochs = 3;
    c.batch_size = 2;
    c.checkpoint_every = 2;
    std::ostringstream log;
    run_make_data(c, log);
    run_train(c, log);
    const auto rows = read_manifest(fs::path(c.data_dir));
    run_complete(c,
                 {fs::path(c.out_dir) / kCheckpointName, fs::path(c.data_dir) / rows[0].scan_path,
                  dir / "completion.ply", dir / "trajectory"},
                 log);
    runs.push_back(snapshot(dir));
  }
  std::string differing;
  for (std::size_t i = 0; i < std::max(runs[0].size(), runs[1].size()); ++i) {
    if (i >= runs[0].size() || i >= runs[1].size() || runs[0][i] != runs[1][i]) {
      differing += " " + (i < runs[0].size() ? runs[0][i].first : runs[1][i].first);
    }
  }
  check.expect(differing.empty(), "reruns differ in:" + differing);
  const std::size_t files = runs[0].size();
  fs::remove_all(root);

  // Any float-representable cloud survives exactly; anything else is rounded
  // once and is then a fixed point.
  std::mt19937_64 rng(1008);
  std::uniform_real_distribution<float> u(-80.0f, 80.0f);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud exact;
    for (int i = 0; i < 500; ++i) {
      const float x = u(rng), y = u(rng), z = u(rng);
      exact.push_back({x, y, z});
    }
    std::stringstream a;
    write_cloud(exact, a, CloudFormat::kPlyBinary);
    check.expect(read_cloud(a, CloudFormat::kPlyBinary) == exact, "binary PLY changed a cloud");

    std::stringstream first, second;
    write_cloud(oracle::random_cloud(rng, 300, -50, 50), first, CloudFormat::kPlyBinary);
    const std::string bytes = first.str();
    write_cloud(read_cloud(first, CloudFormat::kPlyBinary), second, CloudFormat::kPlyBinary);
    check.expect(second.str() == bytes, "binary PLY rewrite is not a fixed point");
  }
  return check.outcome("two full make-data/train/complete runs, " + std::to_string(files) +
                       " files byte-identical; 20 binary PLY round trips exact");
}

// 9 ------------------------------------------------------------------------

Outcome statistical_contracts() {
  Check check;
  Rng rng(derive_seed(1009, 0));
  const PointCloud scan{{0, 0, 0}};
  const int draws = 10000;
  int dropped = 0;
  for (int i = 0; i < draws; ++i) dropped += draw_condition(scan, 0.1, rng).outcome.is_null();
  const double freq = static_cast<double>(dropped) / draws;
  check.expect(std::abs(freq - 0.1) <= 0.01, "drop frequency " + fmt("%.4f", freq));

  std::mt19937_64 gen(1009);
  std::uniform_int_distribution<int> count(0, 20);
  double lo = 1.0, hi = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint64_t> a(32), b(32);
    for (auto& v : a) v = count(gen) < 8 ? 0 : count(gen);
    for (auto& v : b) v = count(gen) < 8 ? 0 : count(gen);
    a[trial % 32] += 1;
    b[(trial * 7) % 32] += 1;
    const double j = jensen_shannon(a, b);
    lo = std::min(lo, j);
    hi = std::max(hi, j);
    check.expect(j >= 0.0 && j <= kLn2, "JSD " + fmt("%.17g", j) + " out of bounds");
  }
  check.expect(jensen_shannon({3, 1, 0, 0}, {3, 1, 0, 0}) == 0.0, "JSD of identical histograms");
  const double disjoint = jensen_shannon({4, 2, 0, 0}, {0, 0, 5, 9});
  check.expect(std::abs(disjoint - std::log(2.0)) <= 1e-12, "disjoint JSD " + fmt("%.17g", disjoint));
  const PointCloud left{{-0.9, 0, 0}, {-0.7, 0.2, 0}}, right{{0.8, 0.1, 0}};
  const double bev = eval_jsd_bev(left, right, 0.5, {-1, 1, -1, 1});
  check.expect(std::abs(bev - std::log(2.0)) <= 1e-12, "disjoint BEV JSD " + fmt("%.17g", bev));
  return check.outcome("drop frequency " + fmt("%.4f", freq) + " over 1e4 draws; 1000 JSDs in [" +
                       fmt("%.3g", lo) + ", " + fmt("%.4f", hi) + "]; disjoint error " +
                       fmt("%.1e", std::abs(disjoint - std::log(2.0))));
}

}  // namespace

int main() {
  ToyRun toy;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 oracle equivalence", oracle_equivalence},
      {"2 flow algebra", flow_algebra},
      {"3 Euler exactness", euler_exactness},
      {"4 guidance identities", cfg_identities},
      {"5 gradient correctness", gradient_correctness},
      {"6 toy completion", [&] { return toy_completion(toy); }},
      {"7 loss-weight ablation", [&] { return ablation_direction(toy); }},
      {"8 determinism and round trip", determinism},
      {"9 statistical contracts", statistical_contracts},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
