#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fdm/binio.hpp"
#include "fdm/cli.hpp"
#include "fdm/eval.hpp"
#include "fdm/tasks/generate.hpp"

namespace fdm {

namespace fs = std::filesystem;

namespace {

struct Context {
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;

  fs::path path(const std::string& key) const { return fs::path(cfg.get(key)); }
};

void require_suite(const std::string& task, const std::string& key) {
  const auto& names = suite_names();
  if (task.empty()) throw ConfigError("missing " + key + " (one of caption, gridworld, sokoban, tsp)");
  if (std::find(names.begin(), names.end(), task) == names.end()) {
    throw ConfigError(key + ": unknown task suite '" + task + "'");
  }
}

int cmd_gen_data(Context& c) {
  const std::string task = c.cfg.get("gen.task");
  require_suite(task, "gen.task");
  const SuiteParams params = c.cfg.suite();
  const auto count = static_cast<std::size_t>(std::max(0LL, c.cfg.get_int("gen.count")));
  const auto seed = static_cast<std::uint64_t>(c.cfg.get_int("seed"));
  const fs::path data = c.path("paths.data");
  // A fresh store rewrites this task's shard from its header.
  TrajStore store(data);
  const GenManifest m = generate_expert_data(store, task, seed, count, params,
                                             static_cast<int>(c.cfg.get_int("gen.workers")));
  const std::string manifest = format_manifest(m);
  write_file(data / (task + ".manifest.txt"), manifest);
  c.out << "wrote " << m.count << " " << task << " episodes (" << m.steps << " steps) to "
        << store.shard_path(task).string() << "\n"
        << manifest;
  return kExitOk;
}

int cmd_build_index(Context& c) {
  const fs::path data = c.path("paths.data"), cache = c.path("paths.cache");
  if (!fs::is_directory(data)) throw IoError("data directory missing: " + data.string());
  const TrajStore store = TrajStore::open(data);
  std::vector<std::string> tasks;
  if (const std::string t = c.cfg.get("gen.task"); !t.empty()) {
    tasks = {t};
  } else {
    tasks = store.task_ids();
  }
  if (tasks.empty()) throw DataError("no episode shards under " + data.string());
  const auto seq_len = static_cast<std::size_t>(c.cfg.model().seq_len);
  for (const auto& t : tasks) {
    const CacheWriteResult r = write_cache(store, t, cache, seq_len);
    const IndexFile idx = read_index(r.paths.index);
    c.out << t << ": " << idx.entries.size() << " index entries at L=" << seq_len << "; tokens "
          << (r.tokens_written ? "written" : "unchanged") << ", index "
          << (r.index_written ? "written" : "unchanged") << " (" << r.paths.index.string()
          << ")\n";
  }
  return kExitOk;
}

int cmd_train(Context& c, bool resume) {
  const ModelConfig model = c.cfg.model();
  const TrainConfig tc = c.cfg.train();
  const PromptConfig prompt = c.cfg.prompt();
  const Dataset data = Dataset::load(c.path("paths.cache"), tc.seq_len);
  const SampleWeights weights = c.cfg.weights(data.task_ids());

  const fs::path run = c.path("paths.run");
  const fs::path ckpt = run / "checkpoint.fdmc", metrics = run / "metrics.log";
  write_file(run / "config.txt", c.cfg.dump());
  TrainState state;
  const bool resuming = resume && fs::exists(ckpt);
  if (resuming) {
    state = checkpoint_load(ckpt);
    if (!(state.model == model)) {
      throw ConfigError(ckpt.string() + ": checkpoint model config differs from model.*");
    }
    if (state.seed != tc.seed) throw ConfigError(ckpt.string() + ": checkpoint seed differs from seed");
  } else {
    state = init_train_state(model, tc.seed);
  }
  std::ofstream log(metrics, resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + metrics.string());
  if (!resuming) log << kTrainLogHeader << "\n";

  const long long every = std::max(1LL, c.cfg.get_int("train.log_every"));
  TrainHooks hooks;
  hooks.checkpoint_path = ckpt;
  hooks.on_step = [&](const TrainLogRow& row) {
    log << format_log_row(row) << "\n";
    log.flush();
    if ((row.step + 1) % every == 0 || row.step + 1 == tc.total_steps) {
      c.out << "step " << row.step + 1 << "/" << tc.total_steps << " loss " << row.loss << " lr "
            << row.lr << " tokens/s " << static_cast<long long>(row.tokens_per_s) << "\n";
    }
  };
  c.out << "training " << parameter_count(model) << " parameters on " << data.task_ids().size()
        << " task(s) from step " << state.step << " to " << tc.total_steps << "\n";
  const auto rows = train(state, data, weights, prompt, tc, hooks);
  if (rows.empty()) c.out << "nothing to do: already at step " << state.step << "\n";
  c.out << "checkpoint " << ckpt.string() << "\n";
  return kExitOk;
}

int cmd_eval(Context& c) {
  const std::string task = c.cfg.get("eval.task");
  require_suite(task, "eval.task");
  const fs::path ckpt = c.path("paths.run") / "checkpoint.fdmc";
  const TrainState state = checkpoint_load(ckpt);
  const fs::path data = c.path("paths.data");
  if (!fs::is_directory(data)) throw IoError("data directory missing: " + data.string());
  const TrajStore store = TrajStore::open(data);
  const TaskTokens tokens = read_token_cache(cache_paths(c.path("paths.cache"), task).tokens);
  const auto seq_len = static_cast<std::size_t>(state.model.seq_len);
  const PromptConfig pc = c.cfg.prompt();
  const TokenSeq prompt = select_eval_prompt(
      tokens, seq_len, pc, static_cast<std::uint64_t>(c.cfg.get_int("eval.prompt_seed")));

  DecodeOptions dec;
  const std::string strategy = c.cfg.get("eval.strategy");
  if (strategy == "greedy") {
    dec.strategy = Strategy::kGreedy;
  } else if (strategy == "sample") {
    dec.strategy = Strategy::kSample;
  } else {
    throw ConfigError("eval.strategy must be greedy or sample, got '" + strategy + "'");
  }
  dec.temperature = c.cfg.get_double("eval.temperature");
  const auto seed = static_cast<std::uint64_t>(c.cfg.get_int("seed"));
  const EvalTask et =
      make_eval_task(task, c.cfg.suite(), static_cast<std::uint64_t>(c.cfg.get_int("eval.first_seed")),
                     static_cast<std::size_t>(std::max(0LL, c.cfg.get_int("eval.episodes"))));
  ModelAgent agent(state.params, state.model, store.task(task).spec, store.tokenizer(), prompt, dec,
                   seed);
  EvalOptions opt;
  opt.random_episodes = static_cast<std::size_t>(std::max(1LL, c.cfg.get_int("eval.random_episodes")));
  opt.random_seed = seed;
  const EvalResult r = evaluate(agent, et, opt);
  const fs::path out = c.path("paths.results") / (task + ".json");
  write_file(out, serialize_result(r));
  c.out << task << ": mean return " << mean_of(r.returns) << ", R_min " << r.r_min << ", R_E "
        << r.r_e << ", normalized score " << r.score << " (" << out.string() << ")\n";
  return kExitOk;
}

int cmd_report(Context& c) {
  const fs::path dir = c.path("paths.results");
  if (!fs::is_directory(dir)) throw IoError("results directory missing: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<EvalResult> results;
  for (const auto& f : files) {
    try {
      results.push_back(parse_result(read_file(f)));
    } catch (const DataError& e) {
      throw DataError(f.string() + ": " + e.what());
    }
  }
  if (results.empty()) throw DataError("no result files (*.json) in " + dir.string());
  const ReportFiles rf = write_report(results, c.path("paths.report"));
  c.out << read_file(rf.summary) << "wrote " << rf.tasks.string() << ", " << rf.domains.string()
        << ", " << rf.summary.string() << "\n";
  return kExitOk;
}

std::string entry_kind(const TokenSeq& seq, std::size_t i) {
  const Entry& e = seq.entries[i];
  const int pos = seq.local_pos[i];
  if (pos == kNoPosition) return "pad";
  if (e.is_patch()) return "patch";
  if (e.symbol == vocab::kSeparator) return "separator";
  if (pos == kActionPosition) return "action";
  if (vocab::is_continuous(e.symbol)) return "continuous";
  return seq.loss_mask[i] ? "text (supervised)" : "discrete/text";
}

template <class T, class F>
std::string list(const std::vector<T>& v, F&& f) {
  std::ostringstream s;
  s << "[";
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? ", " : "") << f(v[i]);
  s << "]";
  return s.str();
}

int cmd_inspect(Context& c) {
  const std::string task = c.cfg.get("inspect.task");
  if (task.empty()) throw ConfigError("missing inspect.task");
  const CachePaths paths = cache_paths(c.path("paths.cache"), task);
  if (!fs::exists(paths.index)) throw DataError("index missing: " + paths.index.string());
  const TaskTokens tokens = read_token_cache(paths.tokens);
  const IndexFile idx = read_index(paths.index);
  const long long entry = c.cfg.get_int("inspect.entry");
  if (entry < 0 || static_cast<std::size_t>(entry) >= idx.entries.size()) {
    throw ConfigError("inspect.entry " + std::to_string(entry) + " is out of range (index has " +
                      std::to_string(idx.entries.size()) + " entries)");
  }
  const IndexEntry& ie = idx.entries[static_cast<std::size_t>(entry)];
  const FlatEpisode& ep = tokens.episodes[ie.path_id];
  const TokenSeq w = ep.slice(ep.step_offsets[ie.start], ep.step_offsets[ie.end]);

  std::vector<std::string> toks;
  std::vector<int> mask, pos;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const Entry& e = w.entries[i];
    toks.push_back(e.is_patch() ? "patch" + std::to_string(e.patch->raster_index)
                                : std::to_string(e.symbol));
    mask.push_back(w.loss_mask[i]);
    pos.push_back(w.local_pos[i]);
  }
  auto id = [](const auto& x) { return x; };
  c.out << "task " << task << ", entry " << entry << ": episode " << ie.path_id << ", timesteps ["
        << ie.start << ", " << ie.end << "), " << w.size() << " entries (L=" << idx.seq_len << ")\n";
  c.out << "tokens: " << list(toks, id) << "\n";
  c.out << "mask: " << list(mask, id) << "\n";
  c.out << "local_pos: " << list(pos, id) << "\n";
  c.out << "\n  index  token    mask  pos  kind\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "  %5zu  %-8s %4d  %3d  %s\n", i, toks[i].c_str(), mask[i],
                  pos[i], entry_kind(w, i).c_str());
    c.out << line;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task sequence model: data generation, training and evaluation", "fdm"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path, preset, seed, data, cache, run, results, report_dir;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--preset", preset, "model and schedule size: desk or db1");
  app.add_option("--set", sets, "override a config key (key=value); repeatable");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--data", data, "episode shard directory (paths.data)");
  app.add_option("--cache", cache, "token cache and index directory (paths.cache)");
  app.add_option("--run", run, "checkpoint and metrics directory (paths.run)");
  app.add_option("--results", results, "evaluation result directory (paths.results)");
  app.add_option("--out", report_dir, "report output directory (paths.report)");

  std::optional<std::string> task, count, n, k, workers, steps, episodes, first_seed, strategy, entry;
  bool resume = false;
  auto* gen = app.add_subcommand("gen-data", "generate expert episodes into shards");
  gen->add_option("--task", task, "task suite")->required();
  gen->add_option("--count", count, "number of episodes");
  gen->add_option("--n", n, "TSP node count (suite.tsp_n)");
  gen->add_option("--k", k, "TSP action-space width (suite.tsp_k)");
  gen->add_option("--workers", workers, "generation threads");
  auto* index = app.add_subcommand("build-index", "tokenize shards and build sampling indexes");
  index->add_option("--task", task, "only this task");
  auto* trn = app.add_subcommand("train", "train from the cached indexes");
  trn->add_option("--steps", steps, "total steps (train.total_steps)");
  trn->add_flag("--resume", resume, "continue from the run's checkpoint");
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on one task");
  ev->add_option("--task", task, "task suite")->required();
  ev->add_option("--episodes", episodes, "evaluation episodes");
  ev->add_option("--first-seed", first_seed, "first environment seed");
  ev->add_option("--strategy", strategy, "greedy or sample");
  auto* rep = app.add_subcommand("report", "aggregate result files into a report");
  auto* insp = app.add_subcommand("inspect-tokens", "print the tokens of one index entry");
  insp->add_option("--task", task, "task id")->required();
  insp->add_option("--entry", entry, "index entry");

  std::vector<const char*> argv = {"fdm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'fdm --help' for usage\n";
    return kExitUsage;
  }

  try {
    Context c{RunConfig{}, out, err};
    if (preset) c.cfg.apply_preset(*preset, "--preset");
    if (config_path) c.cfg.load_file(*config_path);
    if (const char* env = std::getenv("FDM_CACHE_DIR"); env && *env) {
      c.cfg.set("paths.cache", env, "FDM_CACHE_DIR");
    }
    auto flag = [&](const std::optional<std::string>& v, const std::string& key, const std::string& name) {
      if (v) c.cfg.set(key, *v, name);
    };
    flag(seed, "seed", "--seed");
    flag(data, "paths.data", "--data");
    flag(cache, "paths.cache", "--cache");
    flag(run, "paths.run", "--run");
    flag(results, "paths.results", "--results");
    flag(report_dir, "paths.report", "--out");
    flag(count, "gen.count", "--count");
    flag(n, "suite.tsp_n", "--n");
    flag(k, "suite.tsp_k", "--k");
    flag(workers, "gen.workers", "--workers");
    flag(steps, "train.total_steps", "--steps");
    flag(episodes, "eval.episodes", "--episodes");
    flag(first_seed, "eval.first_seed", "--first-seed");
    flag(strategy, "eval.strategy", "--strategy");
    flag(entry, "inspect.entry", "--entry");
    if (*gen || *index) flag(task, "gen.task", "--task");
    if (*ev) flag(task, "eval.task", "--task");
    if (*insp) flag(task, "inspect.task", "--task");
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set " + s + ": expected key=value");
      c.cfg.set(s.substr(0, eq), s.substr(eq + 1), "--set");
    }

    if (*gen) return cmd_gen_data(c);
    if (*index) return cmd_build_index(c);
    if (*trn) return cmd_train(c, resume);
    if (*ev) return cmd_eval(c);
    if (*rep) return cmd_report(c);
    return cmd_inspect(c);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace fdm
