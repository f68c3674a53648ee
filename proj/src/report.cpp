#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dg/error.hpp"
#include "dg/experiment.hpp"

namespace dg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string run_dir(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "runs/%03zu", i);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::uint64_t seed_of(const RunEntry& r) { return r.key.value("seed", std::uint64_t{0}); }

std::size_t step_of(const Report& report, const RunEntry& r) {
  if (report.config.kind == ExperimentKind::PriorInjection) return r.key.at("injected").size();
  return r.key.value("step", std::size_t{0});
}

}  // namespace

json report_to_json(const Report& report) {
  json runs = json::array();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const RunEntry& r = report.runs[i];
    json entry = {{"key", r.key},
                  {"group", r.group},
                  {"metrics", r.metrics},
                  {"histogram", r.histogram},
                  {"selected_epoch", r.record.selected_epoch},
                  {"window_start", r.record.window_start},
                  {"split", run_dir(i) + "/split.json"},
                  {"split_sizes", {{"train", r.split.train.size()}, {"val", r.split.val.size()}, {"test", r.split.test.size()}}}};
    if (!r.domain_accuracy.empty()) entry["domain_accuracy"] = r.domain_accuracy;
    runs.push_back(entry);
  }
  json summary = json::array();
  for (const auto& s : report.summary()) {
    summary.push_back({{"group", s.group}, {"metric", s.metric}, {"n", s.n}, {"mean", s.mean}, {"std", s.std}});
  }
  return {{"tool", "dg"},
          {"version", kToolVersion},
          {"kind", to_string(report.config.kind)},
          {"complete", report.complete},
          {"error", report.error},
          {"config", to_json(report.config)},
          {"domain_names", report.domain_names},
          {"runs", runs},
          {"summary", summary}};
}

void emit_report(const Report& report, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "runs", ec);
  if (ec) throw IoError("cannot create " + (root / "runs").string() + ": " + ec.message());

  write_file(root / "report.json", report_to_json(report).dump(2) + "\n");
  if (!report.complete) {
    write_file(root / "PARTIAL", report.error + "\n");
  } else if (fs::exists(root / "PARTIAL")) {
    fs::remove(root / "PARTIAL");
  }

  std::ostringstream summary;
  summary << "group,metric,n,mean,std\n";
  for (const auto& s : report.summary()) {
    summary << csv_field(s.group) << ',' << s.metric << ',' << s.n << ',' << num(s.mean) << ',' << num(s.std) << '\n';
  }
  write_file(root / "summary.csv", summary.str());

  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const RunEntry& r = report.runs[i];
    const fs::path rd = root / run_dir(i);
    fs::create_directories(rd, ec);
    if (ec) throw IoError("cannot create " + rd.string() + ": " + ec.message());
    json run = to_json(r.record);
    run["key"] = r.key;
    write_file(rd / "run.json", run.dump(2) + "\n");
    write_file(rd / "split.json", to_json(r.split).dump() + "\n");
    std::ostringstream m;
    m << "epoch,train_loss,val_acc,test_acc\n";
    for (const auto& e : r.record.epochs) {
      m << e.epoch << ',' << num(e.train_loss) << ',' << num(e.val_acc) << ',' << num(e.test_acc) << '\n';
    }
    write_file(rd / "metrics.csv", m.str());
  }

  const auto kind = report.config.kind;
  if (kind == ExperimentKind::PairwiseMatrix) {
    std::ostringstream mx, em;
    mx << "seed,train_domain,test_domain,accuracy\n";
    em << "run,seed,train_domain,index,class,domain,x,y\n";
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
      const RunEntry& r = report.runs[i];
      const std::string train = r.key.at("train_domain").get<std::string>();
      for (std::size_t d = 0; d < r.domain_accuracy.size(); ++d) {
        mx << seed_of(r) << ',' << csv_field(train) << ',' << csv_field(report.domain_names.at(d)) << ','
           << num(r.domain_accuracy[d]) << '\n';
      }
      for (const auto& row : r.embeddings) {
        em << i << ',' << seed_of(r) << ',' << csv_field(train) << ',' << static_cast<std::size_t>(row[0]) << ','
           << static_cast<std::size_t>(row[1]) << ',' << static_cast<std::size_t>(row[2]) << ',' << num(row[3]) << ','
           << num(row[4]) << '\n';
      }
    }
    write_file(root / "matrix.csv", mx.str());
    write_file(root / "embeddings.csv", em.str());
  }
  if (kind == ExperimentKind::Incremental || kind == ExperimentKind::PriorInjection) {
    std::ostringstream f;
    f << "experiment,run,seed,step,d\n";
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
      const RunEntry& r = report.runs[i];
      const auto it = r.metrics.find("fid");
      if (it == r.metrics.end()) continue;
      f << to_string(kind) << ',' << i << ',' << seed_of(r) << ',' << step_of(report, r) << ',' << num(it->second)
        << '\n';
    }
    write_file(root / "fid.csv", f.str());
  }
  if (kind == ExperimentKind::PriorInjection) {
    std::ostringstream h;
    h << "run,seed,step,class,count\n";
    for (std::size_t i = 0; i < report.runs.size(); ++i) {
      const RunEntry& r = report.runs[i];
      for (std::size_t c = 0; c < r.histogram.size(); ++c) {
        h << i << ',' << seed_of(r) << ',' << step_of(report, r) << ',' << c << ',' << r.histogram[c] << '\n';
      }
    }
    write_file(root / "histogram.csv", h.str());
  }
}

}  // namespace dg
