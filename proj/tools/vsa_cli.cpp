// SPDX-License-Identifier: Apache-2.0
//
// Command-line front door: `verify` (oracle + gradient suites), `bench`
// (dense vs sparse timing), `train-toy` (planted-cube trainer), `inspect`
// (selection matrices, heatmaps, selection accuracy).

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "vsa/analysis.hpp"
#include "vsa/io.hpp"
#include "vsa/toy.hpp"
#include "vsa/verify.hpp"

using json = nlohmann::ordered_json;
using namespace vsa;

namespace {

struct RunConfig {
  std::array<Index, 3> layout{16, 32, 32};
  std::array<Index, 3> cube{4, 4, 4};
  Index k = 32;
  Index heads = 1;
  Index head_dim = 64;
  Index batch = 1;
  std::string precision = "f32";
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = "out";

  // verify
  Index cases = 24;
  bool inject_fault = false;

  // bench
  Index runs = 5;

  // train-toy / inspect
  Index steps = 5000;
  Index planted = 4;
  double signal_scale = 2.0;
  double noise_scale = 0.5;
  double lr = 1e-3;
  std::string optimizer = "adam";
  std::string pattern;
  std::string schedule;
  std::string params_file;

  json to_json() const {
    json j;
    j["layout"] = layout;
    j["cube"] = cube;
    j["k"] = k;
    j["heads"] = heads;
    j["head_dim"] = head_dim;
    j["batch"] = batch;
    j["precision"] = precision;
    j["seed"] = seed;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["cases"] = cases;
    j["runs"] = runs;
    j["steps"] = steps;
    j["planted"] = planted;
    j["signal_scale"] = signal_scale;
    j["noise_scale"] = noise_scale;
    j["lr"] = lr;
    j["optimizer"] = optimizer;
    j["pattern"] = pattern;
    j["schedule"] = schedule;
    j["params_file"] = params_file;
    return j;
  }

  TileLayout make_layout() const {
    return TileLayout(layout[0], layout[1], layout[2], cube[0], cube[1], cube[2]);
  }
};

template <typename T>
void from_json_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  json j = json::parse(in);
  from_json_if(j, "layout", cfg.layout);
  from_json_if(j, "cube", cfg.cube);
  from_json_if(j, "k", cfg.k);
  from_json_if(j, "heads", cfg.heads);
  from_json_if(j, "head_dim", cfg.head_dim);
  from_json_if(j, "batch", cfg.batch);
  from_json_if(j, "precision", cfg.precision);
  from_json_if(j, "seed", cfg.seed);
  from_json_if(j, "threads", cfg.threads);
  from_json_if(j, "out_dir", cfg.out_dir);
  from_json_if(j, "cases", cfg.cases);
  from_json_if(j, "runs", cfg.runs);
  from_json_if(j, "steps", cfg.steps);
  from_json_if(j, "planted", cfg.planted);
  from_json_if(j, "signal_scale", cfg.signal_scale);
  from_json_if(j, "noise_scale", cfg.noise_scale);
  from_json_if(j, "lr", cfg.lr);
  from_json_if(j, "optimizer", cfg.optimizer);
  from_json_if(j, "pattern", cfg.pattern);
  from_json_if(j, "schedule", cfg.schedule);
  from_json_if(j, "params_file", cfg.params_file);
}

std::array<Index, 3> parse_dims(const std::string& s, const char* what) {
  std::array<Index, 3> out{};
  char sep1 = 0, sep2 = 0;
  std::istringstream is(s);
  if (!(is >> out[0] >> sep1 >> out[1] >> sep2 >> out[2]) || sep1 != 'x' || sep2 != 'x')
    throw CLI::ValidationError(what, "expected AxBxC, got " + s);
  return out;
}

SparsitySchedule parse_schedule(const std::string& s) {
  SparsitySchedule sched;
  std::istringstream is(s);
  char c1, c2, c3, c4;
  if (!(is >> sched.k_start >> c1 >> sched.k_target >> c2 >> sched.warmup_steps >> c3 >>
        sched.interval_steps >> c4 >> sched.decrement) ||
      c1 != ':' || c2 != ':' || c3 != ':' || c4 != ':')
    throw CLI::ValidationError("--schedule", "expected start:target:warmup:interval:dec");
  sched.check();
  return sched;
}

PatternSpec parse_pattern(const std::string& name) {
  if (name == "spatial_temporal" || name == "spatial")
    return {PatternKind::kSpatialTemporal, PatternPhase::kSpatial, 8, 2};
  if (name == "temporal")
    return {PatternKind::kSpatialTemporal, PatternPhase::kTemporal, 8, 2};
  if (name == "strided_spatial")
    return {PatternKind::kStridedWindow, PatternPhase::kSpatial, 8, 2};
  if (name == "strided_temporal")
    return {PatternKind::kStridedWindow, PatternPhase::kTemporal, 8, 2};
  if (name == "compress_kv")
    return {PatternKind::kCompressKv, PatternPhase::kSpatial, 8, 2};
  throw CLI::ValidationError("--pattern", "unknown pattern " + name);
}

void write_sidecar(const RunConfig& cfg) {
  io::atomic_write(std::filesystem::path(cfg.out_dir) / "run_config.json",
                   cfg.to_json().dump(2) + "\n");
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

class Timer {
 public:
  void start() { t0_ = std::chrono::steady_clock::now(); }
  double stop_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

// ---------------------------------------------------------------------------
// verify

int cmd_verify(const RunConfig& cfg) {
  const TileLayout layout = cfg.make_layout();
  SuiteReport all;

  OracleSuiteOptions oracle;
  oracle.cases = cfg.cases;
  oracle.max_seq = std::min<Index>(layout.seq_len, 1024);
  oracle.seed = cfg.seed + 1;
  oracle.double_precision = cfg.precision == "f64";
  oracle.inject_fault = cfg.inject_fault;
  SuiteReport r1 = run_oracle_suite(oracle);
  all.lines.insert(all.lines.end(), r1.lines.begin(), r1.lines.end());

  // one case at the exact configured shape
  {
    std::mt19937_64 rng(cfg.seed + 2);
    const double tol = oracle.double_precision ? 1e-10 : 1e-5;
    const double diff =
        oracle.double_precision
            ? vsa::detail::fine_vs_dense_case<double>(layout, cfg.batch, cfg.heads, cfg.head_dim,
                                                      std::min(cfg.k, layout.num_cubes), false,
                                                      cfg.inject_fault, rng)
            : vsa::detail::fine_vs_dense_case<float>(layout, cfg.batch, cfg.heads, cfg.head_dim,
                                                     std::min(cfg.k, layout.num_cubes), false,
                                                     cfg.inject_fault, rng);
    all.add("fine vs masked dense at configured shape", diff, tol);
  }

  GradcheckSuiteOptions grad;
  grad.seed = cfg.seed + 3;
  SuiteReport r2 = run_gradcheck_suite(grad);
  all.lines.insert(all.lines.end(), r2.lines.begin(), r2.lines.end());

  std::printf("%-54s %12s %10s %s\n", "check", "max err", "tol", "status");
  for (const auto& line : all.lines)
    std::printf("%-54s %12.3e %10.0e %s\n", line.name.c_str(), line.value, line.tol,
                line.pass ? "pass" : "FAIL");
  std::printf("%s\n", all.all_pass() ? "verify: all checks passed" : "verify: FAILURES");
  return all.all_pass() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// bench

template <typename Scalar>
int bench_impl(const RunConfig& cfg) {
  const TileLayout layout = cfg.make_layout();
  const Index top_k = std::min(cfg.k, layout.num_cubes);
  std::mt19937_64 rng(cfg.seed);
  const auto q = AttnTensor<Scalar>::randn(cfg.batch, cfg.heads, layout.seq_len, cfg.head_dim, rng);
  const auto k = AttnTensor<Scalar>::randn(cfg.batch, cfg.heads, layout.seq_len, cfg.head_dim, rng);
  const auto v = AttnTensor<Scalar>::randn(cfg.batch, cfg.heads, layout.seq_len, cfg.head_dim, rng);

  std::vector<double> dense_ms, coarse_ms, fine_ms;
  double sink = 0;  // keeps the timed results live
  Timer t;
  // one warmup round, then timed runs
  for (Index r = 0; r < cfg.runs + 1; ++r) {
    t.start();
    const auto dres = dense_forward(q, k, v);
    const double dm = t.stop_ms();

    t.start();
    const auto art = coarse_forward_select(layout, q, k, v, top_k);
    const double cm = t.stop_ms();

    t.start();
    const auto fres = fine_forward(layout, q, k, v, art.sel);
    const double fm = t.stop_ms();

    sink += static_cast<double>(dres.out.data()[0]) + static_cast<double>(fres.out.data()[0]);
    if (r == 0) continue;
    dense_ms.push_back(dm);
    coarse_ms.push_back(cm);
    fine_ms.push_back(fm);
  }

  const double dm = median(dense_ms), cm = median(coarse_ms), fm = median(fine_ms);
  const double density = sparsity_density(top_k, layout.cube_size, layout.seq_len);
  const double speedup = dm / (cm + fm);

  std::ostringstream csv;
  csv << "seq_len,density,dense_ms,coarse_ms,fine_ms,speedup\n";
  csv << layout.seq_len << "," << density << "," << dm << "," << cm << "," << fm << ","
      << speedup << "\n";
  io::atomic_write(std::filesystem::path(cfg.out_dir) / "bench.csv", csv.str());
  write_sidecar(cfg);

  if (!std::isfinite(sink)) std::fprintf(stderr, "bench: non-finite outputs\n");
  std::printf("L=%lld density=%.4f dense=%.2fms coarse=%.2fms fine=%.2fms speedup=%.2fx "
              "coarse_share=%.1f%%\n",
              static_cast<long long>(layout.seq_len), density, dm, cm, fm, speedup,
              100.0 * cm / (cm + fm));
  std::printf("wrote %s\n", (std::filesystem::path(cfg.out_dir) / "bench.csv").c_str());
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  return cfg.precision == "f64" ? bench_impl<double>(cfg) : bench_impl<float>(cfg);
}

// ---------------------------------------------------------------------------
// train-toy

json matrix_to_json(const MatrixX<float>& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Scalar>
MatrixX<Scalar> matrix_from_json(const json& j) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  MatrixX<Scalar> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<Scalar>();
  return m;
}

PlantedTask task_from_config(const RunConfig& cfg) {
  PlantedTask task{cfg.make_layout()};
  task.planted_count = cfg.planted;
  task.heads = cfg.heads;
  task.head_dim = cfg.head_dim;
  task.signal_scale = cfg.signal_scale;
  task.noise_scale = cfg.noise_scale;
  task.seed = cfg.seed;
  return task;
}

template <typename Scalar>
int train_toy_impl(const RunConfig& cfg) {
  const PlantedTask task = task_from_config(cfg);
  ToyTrainConfig tc;
  tc.batch_size = cfg.batch;
  tc.steps = cfg.steps;
  tc.top_k = std::min(cfg.k, task.layout.num_cubes);
  tc.optimizer.kind = cfg.optimizer == "sgd" ? OptimizerSettings::Kind::kSgd
                                             : OptimizerSettings::Kind::kAdam;
  tc.optimizer.lr = cfg.lr;
  tc.seed = cfg.seed + 1;
  if (!cfg.schedule.empty()) tc.schedule = parse_schedule(cfg.schedule);
  if (!cfg.pattern.empty()) {
    if (cfg.pattern == "random") {
      tc.policy = SelectionPolicy::kFixedRandom;
    } else {
      tc.policy = SelectionPolicy::kFixedPattern;
      tc.pattern = parse_pattern(cfg.pattern);
    }
  }

  const TrainReport<Scalar> rep = train_toy<Scalar>(task, tc);

  std::ostringstream csv;
  csv << "step,loss,recall,k\n";
  for (const auto& s : rep.steps)
    csv << s.step << "," << s.loss << "," << s.recall << "," << s.k << "\n";
  const auto out_dir = std::filesystem::path(cfg.out_dir);
  io::atomic_write(out_dir / "train.csv", csv.str());

  json summary;
  summary["steps"] = rep.steps.size();
  summary["diverged"] = rep.diverged;
  summary["final_loss"] = rep.final_loss();
  summary["final_recall"] = rep.final_recall();
  summary["snapshot_id"] = rep.snapshot_id;
  summary["policy"] = cfg.pattern.empty() ? "learned" : cfg.pattern;
  io::atomic_write(out_dir / "summary.json", summary.dump(2) + "\n");

  json params;
  params["task"] = {{"layout", cfg.layout},   {"cube", cfg.cube},
                    {"planted", cfg.planted}, {"heads", cfg.heads},
                    {"head_dim", cfg.head_dim}, {"signal_scale", cfg.signal_scale},
                    {"noise_scale", cfg.noise_scale}, {"seed", cfg.seed}};
  params["k"] = tc.top_k;
  params["wq"] = matrix_to_json(rep.model.wq.template cast<float>());
  params["wk"] = matrix_to_json(rep.model.wk.template cast<float>());
  params["wv"] = matrix_to_json(rep.model.wv.template cast<float>());
  params["wg"] = matrix_to_json(rep.model.params.gate_weight.template cast<float>());
  const std::string snapshot = "params_" + rep.snapshot_id + ".json";
  io::atomic_write(out_dir / snapshot, params.dump() + "\n");
  write_sidecar(cfg);

  std::printf("train-toy: steps=%zu final_loss=%.6f final_recall=%.3f snapshot=%s%s\n",
              rep.steps.size(), rep.final_loss(), rep.final_recall(), snapshot.c_str(),
              rep.diverged ? " DIVERGED" : "");
  return rep.diverged ? 1 : 0;
}

int cmd_train_toy(const RunConfig& cfg) {
  return cfg.precision == "f64" ? train_toy_impl<double>(cfg) : train_toy_impl<float>(cfg);
}

// ---------------------------------------------------------------------------
// inspect

template <typename Scalar>
int inspect_impl(RunConfig cfg) {
  PlantedTask task = task_from_config(cfg);
  MatrixX<Scalar> wq, wk, wv;
  Index top_k = std::min(cfg.k, task.layout.num_cubes);

  if (!cfg.params_file.empty()) {
    std::ifstream in(cfg.params_file);
    if (!in) throw std::runtime_error("inspect: cannot open " + cfg.params_file);
    json j = json::parse(in);
    const json& t = j.at("task");
    cfg.layout = t.at("layout").get<std::array<Index, 3>>();
    cfg.cube = t.at("cube").get<std::array<Index, 3>>();
    task = PlantedTask{TileLayout(cfg.layout[0], cfg.layout[1], cfg.layout[2], cfg.cube[0],
                                  cfg.cube[1], cfg.cube[2])};
    task.planted_count = t.at("planted").get<Index>();
    task.heads = t.at("heads").get<Index>();
    task.head_dim = t.at("head_dim").get<Index>();
    task.signal_scale = t.at("signal_scale").get<double>();
    task.noise_scale = t.at("noise_scale").get<double>();
    task.seed = t.at("seed").get<std::uint64_t>();
    wq = matrix_from_json<Scalar>(j.at("wq"));
    wk = matrix_from_json<Scalar>(j.at("wk"));
    wv = matrix_from_json<Scalar>(j.at("wv"));
    top_k = std::min<Index>(j.at("k").get<Index>(), task.layout.num_cubes);
  } else {
    std::mt19937_64 rng(cfg.seed + 5);
    const double std_w = 1.0 / std::sqrt(static_cast<double>(task.model_dim()));
    wq = randn_matrix<Scalar>(task.model_dim(), task.heads * task.head_dim, rng, std_w);
    wk = randn_matrix<Scalar>(task.model_dim(), task.heads * task.head_dim, rng, std_w);
    wv = randn_matrix<Scalar>(task.model_dim(), task.heads * task.head_dim, rng, std_w);
  }

  const auto batch = generate_batch<Scalar>(task, 1, cfg.seed + 6);
  const Index heads = task.heads, dim = task.head_dim;
  const TileLayout& layout = task.layout;
  AttnTensor<Scalar> q(1, heads, layout.seq_len, dim), k(1, heads, layout.seq_len, dim),
      v(1, heads, layout.seq_len, dim);
  MatrixX<Scalar> packed;
  packed = batch.hidden.slice(0, 0) * wq;
  for (Index h = 0; h < heads; ++h) q.slice(0, h) = packed.middleCols(h * dim, dim);
  packed = batch.hidden.slice(0, 0) * wk;
  for (Index h = 0; h < heads; ++h) k.slice(0, h) = packed.middleCols(h * dim, dim);
  packed = batch.hidden.slice(0, 0) * wv;
  for (Index h = 0; h < heads; ++h) v.slice(0, h) = packed.middleCols(h * dim, dim);

  const auto art = coarse_forward_select(layout, q, k, v, top_k);

  // selection accuracy against true dense attention mass
  const auto probs = dense_probs(q, k);
  const auto cube_probs = aggregate_probs_to_cubes(layout, probs);
  const MatrixX<double> acc = selection_accuracy(layout, cube_probs, art.sel);

  const auto out_dir = std::filesystem::path(cfg.out_dir);
  json accuracy;
  accuracy["k"] = top_k;
  accuracy["num_cubes"] = layout.num_cubes;
  accuracy["planted_cubes"] = batch.planted[0];
  accuracy["per_head"] = json::array();
  for (Index h = 0; h < heads; ++h) {
    io::atomic_write(out_dir / ("selection_h" + std::to_string(h) + ".csv"),
                     io::selection_csv(art.sel, 0, h));
    io::atomic_write(out_dir / ("selection_h" + std::to_string(h) + ".svg"),
                     io::selection_svg(art.sel, 0, h));
    accuracy["per_head"].push_back(acc(0, h));
    std::printf("head %lld: selection_accuracy=%.4f (%lld of %lld cubes)\n",
                static_cast<long long>(h), acc(0, h), static_cast<long long>(top_k),
                static_cast<long long>(layout.num_cubes));
  }
  io::atomic_write(out_dir / "selection_accuracy.json", accuracy.dump(2) + "\n");
  write_sidecar(cfg);
  std::printf("wrote selection CSV/SVG and accuracy to %s\n", out_dir.c_str());
  return 0;
}

int cmd_inspect(const RunConfig& cfg) {
  return cfg.precision == "f64" ? inspect_impl<double>(cfg) : inspect_impl<float>(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cube-tiled two-stage sparse attention: verification, benchmarks, toy training"};
  app.require_subcommand(1);

  std::string config_path, layout_str, cube_str;
  RunConfig flags;  // flag values land here, merged over file + defaults

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", flags.seed, "RNG seed");
    sub->add_option("--threads", flags.threads, "worker thread count");
    sub->add_option("--precision", flags.precision, "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    sub->add_option("--out", flags.out_dir, "output directory");
    sub->add_option("--k", flags.k, "selected cubes per query cube");
    sub->add_option("--layout", layout_str, "token grid TxHxW");
    sub->add_option("--cube", cube_str, "cube extents CTxCHxCW");
    sub->add_option("--heads", flags.heads, "attention heads");
    sub->add_option("--head-dim", flags.head_dim, "head dimension");
    sub->add_option("--batch", flags.batch, "batch size");
    sub->add_option("--schedule", flags.schedule,
                    "sparsity schedule start:target:warmup:interval:dec");
    sub->add_option("--pattern", flags.pattern,
                    "fixed-pattern control (random, spatial_temporal, temporal, "
                    "strided_spatial, strided_temporal, compress_kv)");
  };

  CLI::App* verify = app.add_subcommand("verify", "run oracle-equivalence and gradcheck suites");
  add_common(verify);
  verify->add_option("--cases", flags.cases, "randomized oracle cases");
  verify->add_flag("--inject-fault", flags.inject_fault,
                   "corrupt one selection; verify must detect the mismatch and fail");

  CLI::App* bench = app.add_subcommand("bench", "time dense vs coarse+fine attention");
  add_common(bench);
  bench->add_option("--runs", flags.runs, "timed repetitions (median reported)");

  CLI::App* train = app.add_subcommand("train-toy", "train the planted-cube demonstration");
  add_common(train);
  train->add_option("--steps", flags.steps, "training steps");
  train->add_option("--planted", flags.planted, "planted cubes per sample");
  train->add_option("--signal-scale", flags.signal_scale, "planted key signature scale");
  train->add_option("--noise-scale", flags.noise_scale, "key noise scale");
  train->add_option("--lr", flags.lr, "learning rate");
  train->add_option("--optimizer", flags.optimizer, "adam or sgd")
      ->check(CLI::IsMember({"adam", "sgd"}));

  CLI::App* inspect = app.add_subcommand("inspect", "export selection matrices and heatmaps");
  add_common(inspect);
  inspect->add_option("--params", flags.params_file, "params snapshot from train-toy");

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  // defaults per command: toy-scale shapes for train-toy / inspect
  RunConfig cfg;
  if (sub == train || sub == inspect) {
    cfg.layout = {8, 8, 8};
    cfg.cube = {2, 2, 2};
    cfg.k = 8;
    cfg.heads = 2;
    cfg.head_dim = 8;
    cfg.batch = 4;
  }
  if (!config_path.empty()) apply_config_file(cfg, config_path);

  // flags override file and defaults
  auto passed = [&](const char* name) { return sub->count(name) > 0; };
  if (passed("--seed")) cfg.seed = flags.seed;
  if (passed("--threads")) cfg.threads = flags.threads;
  if (passed("--precision")) cfg.precision = flags.precision;
  if (passed("--out")) cfg.out_dir = flags.out_dir;
  if (passed("--k")) cfg.k = flags.k;
  if (passed("--layout")) cfg.layout = parse_dims(layout_str, "--layout");
  if (passed("--cube")) cfg.cube = parse_dims(cube_str, "--cube");
  if (passed("--heads")) cfg.heads = flags.heads;
  if (passed("--head-dim")) cfg.head_dim = flags.head_dim;
  if (passed("--batch")) cfg.batch = flags.batch;
  if (passed("--schedule")) cfg.schedule = flags.schedule;
  if (passed("--pattern")) cfg.pattern = flags.pattern;
  if (sub == verify) {
    if (passed("--cases")) cfg.cases = flags.cases;
    if (passed("--inject-fault")) cfg.inject_fault = flags.inject_fault;
  }
  if (sub == bench && passed("--runs")) cfg.runs = flags.runs;
  if (sub == train) {
    if (passed("--steps")) cfg.steps = flags.steps;
    if (passed("--planted")) cfg.planted = flags.planted;
    if (passed("--signal-scale")) cfg.signal_scale = flags.signal_scale;
    if (passed("--noise-scale")) cfg.noise_scale = flags.noise_scale;
    if (passed("--lr")) cfg.lr = flags.lr;
    if (passed("--optimizer")) cfg.optimizer = flags.optimizer;
  }
  if (sub == inspect && passed("--params")) cfg.params_file = flags.params_file;

  set_num_threads(cfg.threads);

  try {
    if (sub == verify) return cmd_verify(cfg);
    if (sub == bench) return cmd_bench(cfg);
    if (sub == train) return cmd_train_toy(cfg);
    if (sub == inspect) return cmd_inspect(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
