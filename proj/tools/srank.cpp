// srank: generate data, train, evaluate, verify and benchmark the ranker.
//
//   srank [--config FILE] [--seed N] <gen|train|eval|verify|bench> [options]
//
// Precedence: command-line flag > SRANK_SEED (seed only) > config file > defaults.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "srank/srank.hpp"

namespace {

using srank::ExitCode;

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream os(path);
  if (!os) throw srank::DataError("cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path)) throw srank::ConfigError(what + " not found: " + path);
}

int cmd_gen(const srank::RunConfig& cfg) {
  srank::Dataset ds = srank::generate_synthetic(cfg.synthetic());
  if (cfg.augment_rate > 0.0)
    ds.records = srank::augment_with_empty(ds.records, ds.catalog, cfg.augment_rate, cfg.seed ^ 0xA5A5A5A5ULL,
                                           cfg.far_margin);
  srank::write_dataset(cfg.data_path, ds.catalog, ds.records);

  std::map<std::size_t, std::size_t> histogram;
  for (const auto& g : ds.catalog.groups) ++histogram[g.documents.size() - 1];
  const auto idx = ds.catalog.group_index();
  std::size_t empties = 0;
  for (const auto& r : ds.records) empties += srank::is_empty_gold(ds.catalog, idx, r) ? 1 : 0;

  std::ifstream in(cfg.data_path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::cout << "wrote " << cfg.data_path << "\n"
            << "groups: " << ds.catalog.groups.size() << "\n"
            << "documents: " << ds.catalog.document_count() << " (including one Empty per group)\n"
            << "records: " << ds.records.size() << "\n"
            << "empty rate: " << fmt("%.4f", ds.records.empty() ? 0.0 : double(empties) / double(ds.records.size()))
            << "\n"
            << "group size histogram (documents excluding Empty):\n";
  for (const auto& [size, count] : histogram) std::cout << "  " << size << ": " << count << "\n";
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(srank::digest_bytes(bytes)));
  std::cout << "digest: " << digest << "\n";
  return 0;
}

int cmd_train(const srank::RunConfig& cfg, const std::string& log_path) {
  require_file(cfg.data_path, "dataset");
  const srank::Dataset ds = srank::read_dataset(cfg.data_path);
  const auto [train, heldout] = srank::split_holdout(ds.records, cfg.holdout_fraction);
  srank::TrainConfig tc = cfg.train();
  tc.model.d_in = ds.catalog.d_in;

  std::cout << "training on " << train.size() << " records, holding out " << heldout.size() << "\n"
            << "loss " << srank::to_string(tc.loss) << ", refresh interval " << tc.refresh_interval
            << ", learning rate " << tc.learning_rate << ", max epochs " << tc.max_epochs << "\n";
  srank::TrainerState state = srank::init_trainer(tc, ds.catalog);
  srank::self_train_cycle(state, tc, train, ds.catalog, heldout, [](const srank::EpochLog& e) {
    std::cout << "epoch " << e.epoch << " loss " << fmt("%.9g", e.mean_loss) << " cache v" << e.cache_version;
    if (e.heldout_accuracy && !e.refreshed) std::cout << " heldout_acc " << fmt("%.4f", *e.heldout_accuracy);
    if (e.refreshed) {
      std::cout << " | refresh";
      if (e.pre_refresh_accuracy)
        std::cout << " (acc before " << fmt("%.4f", *e.pre_refresh_accuracy) << ", right after "
                  << fmt("%.4f", *e.immediate_post_refresh_accuracy) << ")";
    }
    std::cout << "\n";
  });
  std::cout << (state.converged ? "converged" : "stopped") << " after " << state.epoch << " epochs\n";
  srank::write_params(cfg.params_path, state.params);
  srank::write_cache(cfg.cache_path, state.cache);
  std::cout << "wrote " << cfg.params_path << " and " << cfg.cache_path << " (cache v" << state.cache.version
            << ")\n";
  write_json(log_path, srank::to_json(state));
  return 0;
}

int cmd_eval(const srank::RunConfig& cfg, const std::string& split, const std::string& json_path) {
  require_file(cfg.params_path, "checkpoint");
  require_file(cfg.cache_path, "embedding cache");
  require_file(cfg.data_path, "dataset");
  const srank::Dataset ds = srank::read_dataset(cfg.data_path);
  const srank::RankerParams params = srank::read_params(cfg.params_path);
  const srank::EmbeddingCache cache = srank::read_cache(cfg.cache_path);
  const auto [train, heldout] = srank::split_holdout(ds.records, cfg.holdout_fraction);
  const auto& records = split == "all" ? ds.records : split == "train" ? train : heldout;

  const srank::EvalReport r = srank::evaluate(params, cache, records, ds.catalog);
  std::cout << "split: " << split << " (" << r.n_queries << " queries)\n"
            << "top-one accuracy: " << fmt("%.6f", r.top_one_accuracy) << " (" << r.correct << "/" << r.n_queries
            << ")\n"
            << "silent precision: " << fmt("%.6f", r.silent_precision) << "\n"
            << "silent recall: " << fmt("%.6f", r.silent_recall) << "\n"
            << "silent f1: " << fmt("%.6f", r.silent_f1) << "\n"
            << "note: silent precision/recall with a zero denominator are reported as 1\n"
            << "accuracy by candidate count:\n";
  for (const auto& [n, b] : r.by_candidate_count)
    std::cout << "  " << n << ": " << fmt("%.4f", double(b.correct) / double(b.total)) << " (" << b.total << ")\n";
  write_json(json_path, srank::to_json(r));
  return 0;
}

int cmd_verify(std::uint64_t seed, const std::string& json_path) {
  const auto results = srank::run_verification(seed);
  bool ok = true;
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << fmt("%.3f", r.seconds)
              << " s]\n";
    j.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
  }
  write_json(json_path, {{"kind", "verify"}, {"schema_version", srank::kReportSchemaVersion}, {"passed", ok},
                         {"checks", j}});
  std::cout << (ok ? "all checks passed" : "verification FAILED") << "\n";
  return ok ? 0 : static_cast<int>(ExitCode::kNumerical);
}

int cmd_bench(const srank::RunConfig& cfg, const std::string& sizes, std::size_t reps, bool inference,
              bool compare, const std::string& json_path) {
  nlohmann::json out = {{"kind", "bench"}, {"schema_version", srank::kReportSchemaVersion}};
  srank::BenchOptions opt;
  opt.repetitions = reps;
  opt.seed = cfg.seed;
  const srank::BenchReport b = srank::bench_loss_scaling(srank::parse_sizes(sizes), opt);
  std::cout << "n, linear_s, quadratic_s, max_abs_diff\n";
  for (const auto& p : b.points)
    std::cout << p.n << ", " << fmt("%.3e", p.linear_seconds) << ", " << fmt("%.3e", p.quadratic_seconds) << ", "
              << fmt("%.1e", p.max_abs_difference) << "\n";
  std::cout << "log-log slope (upper half): linear " << fmt("%.3f", b.linear_slope) << ", quadratic "
            << fmt("%.3f", b.quadratic_slope) << "\n"
            << "doubling ratio at largest size: linear " << fmt("%.2f", b.linear_doubling_ratio) << "x, quadratic "
            << fmt("%.2f", b.quadratic_doubling_ratio) << "x\n";
  out["loss_scaling"] = srank::to_json(b);

  if (inference || compare) require_file(cfg.data_path, "dataset");
  if (inference) {
    require_file(cfg.params_path, "checkpoint");
    require_file(cfg.cache_path, "embedding cache");
    const srank::Dataset ds = srank::read_dataset(cfg.data_path);
    const auto params = srank::read_params(cfg.params_path);
    const auto cache = srank::read_cache(cfg.cache_path);
    const auto heldout = srank::split_holdout(ds.records, cfg.holdout_fraction).second;
    const auto ib = srank::bench_inference(params, cache, heldout.empty() ? ds.records : heldout, ds.catalog, reps);
    std::cout << "inference per query: cached median " << fmt("%.3e", ib.cached.median_seconds) << " s (p95 "
              << fmt("%.3e", ib.cached.p95_seconds) << "), re-encode median " << fmt("%.3e", ib.reencode.median_seconds)
              << " s (p95 " << fmt("%.3e", ib.reencode.p95_seconds) << "), ratio " << fmt("%.2f", ib.ratio) << "x\n";
    out["inference"] = srank::to_json(ib);
  }
  if (compare) {
    const srank::Dataset ds = srank::read_dataset(cfg.data_path);
    srank::TrainConfig tc = cfg.train();
    tc.model.d_in = ds.catalog.d_in;
    const auto arms = srank::compare_losses(ds, tc, cfg.holdout_fraction);
    for (const auto& a : arms)
      std::cout << "loss " << srank::to_string(a.loss) << ": accuracy " << fmt("%.4f", a.final_accuracy) << ", epochs "
                << a.epochs_run << (a.epochs_to_converge ? " (converged)" : "")
                << (a.diverged ? ", DIVERGED: " + a.error : "") << "\n";
    out["compare_losses"] = srank::to_json(arms);
  }
  write_json(json_path, out);
  return 0;
}

std::string prescan_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  try {
    srank::RunConfig cfg;
    if (const auto path = prescan_config(argc, argv); !path.empty()) cfg = srank::load_config(path, cfg);

    CLI::App app{"srank: learning-to-rank with a linear-time pairwise loss and cached cross attention"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, save_config;
    app.add_option("--config", config_path, "key = value config file (flags override it)");
    app.add_option("--seed", cfg.seed, "random seed")->envname("SRANK_SEED");
    app.add_option("--save-config", save_config, "write the effective configuration to this file");

    auto* gen = app.add_subcommand("gen", "generate a synthetic SRNKDATA dataset");
    gen->add_option("--out,--data", cfg.data_path, "output dataset path");
    gen->add_option("--groups", cfg.groups, "number of candidate groups");
    gen->add_option("--size-min", cfg.size_min, "minimum documents per group (Empty excluded)");
    gen->add_option("--size-max", cfg.size_max, "maximum documents per group (Empty excluded)");
    gen->add_option("--d-in", cfg.d_in, "raw feature width");
    gen->add_option("--queries", cfg.queries, "number of queries");
    gen->add_option("--empty-rate", cfg.empty_rate, "fraction of no-answer queries");
    gen->add_option("--noise", cfg.noise, "RMS query displacement from its gold prototype");
    gen->add_option("--far-margin", cfg.far_margin, "minimum distance of no-answer queries from prototypes");
    gen->add_option("--augment-rate", cfg.augment_rate, "extra no-answer records per group, as a fraction");

    auto add_model = [&](CLI::App* sub) {
      sub->add_option("--data", cfg.data_path, "dataset path");
      sub->add_option("--params", cfg.params_path, "SRNKPARM checkpoint path");
      sub->add_option("--cache", cfg.cache_path, "SRNKCACH embedding cache path");
      sub->add_option("--holdout", cfg.holdout_fraction, "held-out fraction (trailing records)");
    };

    std::string log_path;
    auto* train = app.add_subcommand("train", "train with periodic embedding-cache refresh");
    add_model(train);
    train->add_option("--loss", cfg.loss, "linear_pairwise or mle")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, srank::LossKind>{{"linear_pairwise", srank::LossKind::kLinearPairwise},
                                                   {"mle", srank::LossKind::kMle}}));
    train->add_option("--chunk-size", cfg.chunk_size, "evaluate the pairwise loss in chunks (0 = off)");
    train->add_option("--refresh-interval", cfg.refresh_interval, "rebuild the embedding cache every N epochs");
    train->add_option("--lr", cfg.learning_rate, "learning rate");
    train->add_option("--max-epochs", cfg.max_epochs, "maximum epochs");
    train->add_option("--tol", cfg.tolerance, "relative loss change for convergence");
    train->add_option("--d-model", cfg.d_model, "model width");
    train->add_option("--heads", cfg.heads, "attention heads");
    train->add_option("--hidden", cfg.hidden, "score head hidden width");
    train->add_option("--eval-every", cfg.eval_every, "held-out evaluation period in epochs (0 = refreshes only)");
    train->add_option("--log", log_path, "write the training log as JSON");

    std::string split = "heldout", eval_json;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_model(eval);
    eval->add_option("--split", split, "heldout, train or all")->check(CLI::IsMember({"heldout", "train", "all"}));
    eval->add_option("--json", eval_json, "write the report as JSON");

    std::string verify_json;
    std::uint64_t verify_seed = 20240601;
    auto* verify = app.add_subcommand("verify", "run the invariant and gradient self-checks");
    verify->add_option("--json", verify_json, "write results as JSON");
    verify->add_option("--check-seed", verify_seed, "seed for the random check instances");

    std::string sizes = "256..16384", bench_json;
    std::size_t reps = 5;
    bool inference = false, compare = false;
    auto* bench = app.add_subcommand("bench", "loss scaling, inference latency and loss comparison");
    add_model(bench);
    bench->add_option("--sizes", sizes, "'lo..hi' (powers of two) or a comma list");
    bench->add_option("--reps", reps, "timed repetitions per size (>= 5)");
    bench->add_flag("--inference", inference, "also time cached vs re-encoded inference");
    bench->add_flag("--compare-losses", compare, "also train one model per loss on --data");
    bench->add_option("--json", bench_json, "write the report as JSON");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
    }

    cfg.validate();
    if (!save_config.empty()) {
      std::ofstream os(save_config);
      if (!os) throw srank::ConfigError("cannot write " + save_config);
      os << srank::to_text(cfg);
    }

    if (gen->parsed()) return cmd_gen(cfg);
    if (train->parsed()) return cmd_train(cfg, log_path);
    if (eval->parsed()) return cmd_eval(cfg, split, eval_json);
    if (verify->parsed()) return cmd_verify(verify_seed, verify_json);
    if (bench->parsed()) return cmd_bench(cfg, sizes, reps, inference, compare, bench_json);
    return static_cast<int>(ExitCode::kUsage);
  } catch (const srank::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  }
}
