#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fdm/binio.hpp"
#include "fdm/cli.hpp"
#include "fdm/eval.hpp"
#include "fdm/tasks/generate.hpp"
#include "fdm/tasks/tsp.hpp"

namespace py = pybind11;
using namespace fdm;

namespace {

py::dict model_dict(const ModelConfig& c) {
  py::dict d;
  d["blocks"] = c.blocks;
  d["heads"] = c.heads;
  d["width"] = c.width;
  d["ffn_size"] = c.ffn_size;
  d["dropout"] = c.dropout;
  d["norm"] = to_string(c.norm);
  d["tied_embedding"] = c.tied_embedding;
  d["seq_len"] = c.seq_len;
  d["mem_len"] = c.mem_len;
  return d;
}

py::dict result_dict(const EvalResult& r) {
  py::dict d;
  d["task"] = r.task_id;
  d["domain"] = r.domain;
  d["returns"] = r.returns;
  d["r_min"] = r.r_min;
  d["r_e"] = r.r_e;
  d["score"] = r.score;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Tokenization, data generation, evaluation and CLI entry points";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<SpecError>(m, "SpecError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  auto v = m.def_submodule("vocab", "Shared token table layout");
  v.attr("DISCRETE_END") = vocab::kDiscreteEnd;
  v.attr("TEXT_END") = vocab::kTextEnd;
  v.attr("CONTINUOUS_BEGIN") = vocab::kContinuousBegin;
  v.attr("CONTINUOUS_END") = vocab::kContinuousEnd;
  v.attr("PAD") = vocab::kPad;
  v.attr("SEPARATOR") = vocab::kSeparator;
  v.attr("TABLE_SIZE") = vocab::kTableSize;

  m.def("encode_discrete", [](std::int64_t x) { return encode_discrete(x); }, py::arg("value"));
  m.def("encode_continuous", &encode_continuous, py::arg("value"));
  m.def("decode_continuous", &decode_continuous, py::arg("token"));

  py::class_<TextTokenizer>(m, "TextTokenizer")
      .def_static(
          "train",
          [](const std::vector<std::string>& corpus, std::size_t vocab_size) {
            return TextTokenizer::train(corpus, vocab_size);
          },
          py::arg("corpus"), py::arg("vocab_size"))
      .def_static("load", &TextTokenizer::load, py::arg("path"))
      .def("save", &TextTokenizer::save, py::arg("path"))
      .def("tokenize", &TextTokenizer::tokenize, py::arg("text"))
      .def(
          "detokenize",
          [](const TextTokenizer& t, const std::vector<Token>& ids) { return t.detokenize(ids); },
          py::arg("tokens"))
      .def("__len__", &TextTokenizer::size);
  m.def("suite_tokenizer", &suite_tokenizer);
  m.def("suite_names", &suite_names);

  m.def(
      "generate_expert_data",
      [](const std::filesystem::path& data_dir, const std::string& task, std::uint64_t seed,
         std::size_t count, int workers) {
        TrajStore store(data_dir);
        const GenManifest g = generate_expert_data(store, task, seed, count, SuiteParams{}, workers);
        write_file(data_dir / (task + ".manifest.txt"), format_manifest(g));
        py::dict d;
        d["task"] = g.task;
        d["episodes"] = g.count;
        d["steps"] = g.steps;
        d["mean_return"] = g.mean_return;
        d["shard"] = store.shard_path(task);
        return d;
      },
      py::arg("data_dir"), py::arg("task"), py::arg("seed") = 0, py::arg("count") = 100,
      py::arg("workers") = 1, "Expert episodes for env seeds [seed, seed + count) into a shard.");

  m.def(
      "build_index",
      [](const std::filesystem::path& data_dir, const std::filesystem::path& cache_dir,
         std::size_t seq_len) {
        const TrajStore store = TrajStore::open(data_dir);
        std::map<std::string, std::size_t> entries;
        for (const auto& t : store.task_ids()) {
          const auto r = write_cache(store, t, cache_dir, seq_len);
          entries[t] = read_index(r.paths.index).entries.size();
        }
        return entries;
      },
      py::arg("data_dir"), py::arg("cache_dir"), py::arg("seq_len") = 256,
      "Token caches and sliding-window indexes; returns index entries per task.");

  m.def(
      "lr_at", [](std::int64_t step, const std::string& preset) {
        return lr_at(step, TrainConfig::preset(preset));
      },
      py::arg("step"), py::arg("preset") = "desk");

  m.def(
      "tsp_oracle",
      [](const std::vector<std::pair<double, double>>& xy) {
        std::vector<Point> pts;
        for (const auto& [x, y] : xy) pts.push_back({x, y});
        const Tour t = tsp_oracle(pts);
        return py::make_tuple(t.order, t.length);
      },
      py::arg("coords"), "Nearest-neighbor tour refined by 2-opt: (order, length).");

  m.def("normalized_score", &normalized_score, py::arg("returns"), py::arg("r_min"),
        py::arg("r_e"));

  m.def(
      "evaluate_baseline",
      [](const std::string& suite, const std::string& agent, std::uint64_t first_seed,
         std::size_t episodes, std::uint64_t seed) {
        const EvalTask task = make_eval_task(suite, SuiteParams{}, first_seed, episodes);
        EvalOptions opt;
        opt.random_seed = seed;
        if (agent == "expert") {
          ExpertAgent a;
          return result_dict(evaluate(a, task, opt));
        }
        if (agent == "random") {
          RandomAgent a(derive_seed(seed, 1));
          return result_dict(evaluate(a, task, opt));
        }
        throw ConfigError("agent must be 'expert' or 'random', got '" + agent + "'");
      },
      py::arg("suite"), py::arg("agent") = "expert", py::arg("first_seed") = 0,
      py::arg("episodes") = 10, py::arg("seed") = 0,
      "Scores the expert or a uniform-random policy with the evaluation harness.");

  m.def(
      "checkpoint_info",
      [](const std::filesystem::path& path) {
        const TrainState s = checkpoint_load(path);
        py::dict d;
        d["step"] = s.step;
        d["seed"] = s.seed;
        d["parameters"] = parameter_count(s.model);
        d["model"] = model_dict(s.model);
        return d;
      },
      py::arg("path"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs an fdm subcommand; returns (exit code, stdout, stderr).");
}
