#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fdm/binio.hpp"
#include "fdm/eval.hpp"

namespace fdm {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string serialize_result(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["task"] = r.task_id;
  j["domain"] = r.domain;
  j["returns"] = r.returns;
  j["r_min"] = r.r_min;
  j["r_e"] = r.r_e;
  j["score"] = r.score;
  return j.dump(2) + "\n";
}

EvalResult parse_result(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalResult r;
    r.task_id = j.at("task").get<std::string>();
    r.domain = j.at("domain").get<std::string>();
    r.returns = j.at("returns").get<std::vector<double>>();
    r.r_min = j.at("r_min").get<double>();
    r.r_e = j.at("r_e").get<double>();
    r.score = j.at("score").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed result file: ") + e.what());
  }
}

std::vector<DomainSummary> summarize_domains(const std::vector<EvalResult>& results) {
  std::map<std::string, std::vector<double>> by_domain;
  for (const auto& r : results) by_domain[r.domain].push_back(r.score);
  std::vector<DomainSummary> out;
  for (const auto& [domain, scores] : by_domain) {
    DomainSummary d;
    d.domain = domain;
    d.tasks = scores.size();
    d.mean_score = mean_of(scores);
    const auto above = std::count_if(scores.begin(), scores.end(), [](double s) { return s >= 0.5; });
    d.fraction_above_half = static_cast<double>(above) / static_cast<double>(scores.size());
    out.push_back(d);
  }
  return out;
}

std::string report_task_csv(const std::vector<EvalResult>& results) {
  std::ostringstream out;
  out << "task,domain,n,mean_return,r_min,r_e,score\n";
  for (const auto& r : results) {
    out << r.task_id << "," << r.domain << "," << r.returns.size() << "," << num(mean_of(r.returns))
        << "," << num(r.r_min) << "," << num(r.r_e) << "," << num(r.score) << "\n";
  }
  return out.str();
}

std::string report_domain_csv(const std::vector<EvalResult>& results) {
  std::ostringstream out;
  out << "domain,tasks,mean_score,fraction_score_ge_0.5\n";
  for (const auto& d : summarize_domains(results)) {
    out << d.domain << "," << d.tasks << "," << num(d.mean_score) << ","
        << num(d.fraction_above_half) << "\n";
  }
  return out.str();
}

std::string report_summary(const std::vector<EvalResult>& results) {
  std::ostringstream out;
  out << "# Evaluation summary\n\n";
  out << "| task | domain | episodes | mean return | R_min | R_E | score |\n";
  out << "|---|---|---|---|---|---|---|\n";
  std::size_t above = 0;
  for (const auto& r : results) {
    out << "| " << r.task_id << " | " << r.domain << " | " << r.returns.size() << " | "
        << short_num(mean_of(r.returns)) << " | " << short_num(r.r_min) << " | "
        << short_num(r.r_e) << " | " << short_num(r.score) << " |\n";
    above += r.score >= 0.5;
  }
  out << "\n| domain | tasks | mean score | score >= 0.5 |\n|---|---|---|---|\n";
  for (const auto& d : summarize_domains(results)) {
    out << "| " << d.domain << " | " << d.tasks << " | " << short_num(d.mean_score) << " | "
        << short_num(d.fraction_above_half) << " |\n";
  }
  out << "\n" << above << " of " << results.size()
      << " tasks reach at least half of the expert score.\n";
  return out.str();
}

ReportFiles write_report(std::vector<EvalResult> results, const std::filesystem::path& out_dir) {
  if (results.empty()) throw DataError("report needs at least one result");
  std::stable_sort(results.begin(), results.end(),
                   [](const EvalResult& a, const EvalResult& b) { return a.task_id < b.task_id; });
  ReportFiles f{out_dir / "tasks.csv", out_dir / "domains.csv", out_dir / "summary.md"};
  write_file(f.tasks, report_task_csv(results));
  write_file(f.domains, report_domain_csv(results));
  write_file(f.summary, report_summary(results));
  return f;
}

}  // namespace fdm
