#pragma once

// Attack efficacy (two-class rule), stealth and frequency reports, CSV output.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "freqdoor/checkpoint.hpp"
#include "freqdoor/frequency.hpp"
#include "freqdoor/metrics.hpp"
#include "freqdoor/victim.hpp"

namespace freqdoor {

/// Success reference (clean baseline output on the benign input) and failure
/// reference (degradation target of the benign input).
struct ClassificationRefs {
  Image hq;
  Image low;
};

/// 1 if the output is perceptually closer to the success reference than to the
/// failure reference; ties give 0.
inline int classify_restoration(const Image& out, const ClassificationRefs& refs) {
  require_same_shape(out, refs.hq, "classify_restoration");
  require_same_shape(out, refs.low, "classify_restoration");
  return perceptual_distance(out, refs.hq) < perceptual_distance(out, refs.low) ? 1 : 0;
}

inline std::vector<ClassificationRefs> make_refs(const RestorationModel<float>& clean_model,
                                                 const std::vector<Image>& benign, int workers = 1) {
  std::vector<ClassificationRefs> refs(benign.size());
  nn::parallel_for(benign.size(), workers, [&](std::size_t i) {
    refs[i] = {clean_model.restore(benign[i]), degradation_target(benign[i], 0.1)};
  });
  return refs;
}

/// Labels of restore(inputs[i]) against refs[i], in input order.
inline std::vector<int> classify_all(const RestorationModel<float>& model, const std::vector<Image>& inputs,
                                     const std::vector<ClassificationRefs>& refs, int workers = 1) {
  require(!inputs.empty(), "classification set is empty");
  require(inputs.size() == refs.size(), "inputs and references are misaligned");
  std::vector<int> labels(inputs.size());
  nn::parallel_for(inputs.size(), workers,
                   [&](std::size_t i) { labels[i] = classify_restoration(model.restore(inputs[i]), refs[i]); });
  return labels;
}

inline double percent_of(const std::vector<int>& labels, int value) {
  std::size_t c = 0;
  for (int l : labels) c += l == value;
  return 100.0 * double(c) / double(labels.size());
}

/// Percentage of benign inputs whose restoration classifies as 1.
inline double benign_accuracy(const RestorationModel<float>& victim, const std::vector<Image>& benign,
                              const std::vector<ClassificationRefs>& refs, int workers = 1,
                              std::vector<int>* labels = nullptr) {
  auto l = classify_all(victim, benign, refs, workers);
  const double ba = percent_of(l, 1);
  if (labels) *labels = std::move(l);
  return ba;
}

inline std::vector<Image> poison_all(const Attack& attack, const std::vector<Image>& benign, int workers = 1) {
  std::vector<Image> out(benign.size());
  nn::parallel_for(benign.size(), workers, [&](std::size_t i) { out[i] = attack.poison(benign[i], 0); });
  return out;
}

/// Percentage of poisoned inputs whose restoration classifies as 0.
inline double attack_success_rate(const RestorationModel<float>& victim, const std::vector<Image>& poisoned,
                                  const std::vector<ClassificationRefs>& refs, int workers = 1,
                                  std::vector<int>* labels = nullptr) {
  auto l = classify_all(victim, poisoned, refs, workers);
  const double asr = percent_of(l, 0);
  if (labels) *labels = std::move(l);
  return asr;
}

inline double attack_success_rate(const RestorationModel<float>& victim, const Attack& attack,
                                  const std::vector<Image>& benign, const std::vector<ClassificationRefs>& refs,
                                  int workers = 1, std::vector<int>* labels = nullptr) {
  require(!benign.empty(), "attack_success_rate: empty test set");
  return attack_success_rate(victim, poison_all(attack, benign, workers), refs, workers, labels);
}

struct QualityStats {
  double psnr = 0;
  double ssim = 0;
  double perceptual = 0;
};

struct ImageRow {
  std::size_t id = 0;
  std::string pair;  ///< e.g. "lq_vs_gt"
  QualityStats q;
  int label = -1;    ///< classification label, -1 when not applicable
};

struct FrequencyRow {
  std::size_t id = 0;
  double low_mse = 0;
  double high_mse = 0;
};

struct MetricsReport {
  double asr = 0;
  double ba = 0;
  std::vector<ImageRow> rows;
  std::vector<FrequencyRow> frequency;
  std::map<std::string, std::string> provenance;
};

inline QualityStats quality(const Image& a, const Image& b) {
  return {psnr(a, b), ssim(a, b), perceptual_distance(a, b)};
}

struct StealthReport {
  QualityStats benign_vs_gt;
  QualityStats poisoned_vs_gt;
  QualityStats poisoned_vs_benign;
  std::vector<ImageRow> rows;  ///< three rows per image, in input order
};

inline StealthReport stealth_report(const std::vector<Image>& benign_lq, const std::vector<Image>& poisoned,
                                    const std::vector<Image>& gt, int workers = 1) {
  require(!benign_lq.empty(), "stealth_report: empty set");
  require(benign_lq.size() == poisoned.size() && benign_lq.size() == gt.size(), "stealth_report: misaligned sets");
  const std::size_t n = benign_lq.size();
  std::vector<std::array<QualityStats, 3>> q(n);
  nn::parallel_for(n, workers, [&](std::size_t i) {
    q[i] = {quality(benign_lq[i], gt[i]), quality(poisoned[i], gt[i]), quality(poisoned[i], benign_lq[i])};
  });
  StealthReport r;
  static const char* names[3] = {"lq_vs_gt", "poisoned_vs_gt", "poisoned_vs_lq"};
  QualityStats* sums[3] = {&r.benign_vs_gt, &r.poisoned_vs_gt, &r.poisoned_vs_benign};
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) {
      r.rows.push_back({i, names[k], q[i][k], -1});
      sums[k]->psnr += q[i][k].psnr / double(n);
      sums[k]->ssim += q[i][k].ssim / double(n);
      sums[k]->perceptual += q[i][k].perceptual / double(n);
    }
  return r;
}

struct FrequencyReport {
  std::vector<FrequencyRow> rows;
  double mean_low = 0;
  double mean_high = 0;
};

inline FrequencyReport frequency_report(const std::vector<Image>& benign, const std::vector<Image>& poisoned,
                                        const FrequencyAnalysisConfig& cfg = {}, int workers = 1) {
  require(!benign.empty(), "frequency_report: empty set");
  require(benign.size() == poisoned.size(), "frequency_report: misaligned sets");
  FrequencyReport r;
  r.rows.resize(benign.size());
  nn::parallel_for(benign.size(), workers, [&](std::size_t i) {
    const auto d = frequency_distance(benign[i], poisoned[i], cfg);
    r.rows[i] = {i, d.low_mse, d.high_mse};
  });
  for (const auto& row : r.rows) {
    r.mean_low += row.low_mse;
    r.mean_high += row.high_mse;
  }
  r.mean_low /= double(r.rows.size());
  r.mean_high /= double(r.rows.size());
  return r;
}

/// Shortest decimal that round-trips a double.
inline std::string fmt_num(double v) {
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// CSV table with '#'-prefixed provenance lines before the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::map<std::string, std::string> provenance;

  void add(std::vector<std::string> row) {
    require(row.size() == header.size(), "csv row width differs from header");
    rows.push_back(std::move(row));
  }

  std::string str() const {
    std::string s;
    for (const auto& [k, v] : provenance) s += "# " + k + "=" + v + "\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
      s += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return s;
  }

  void write(const std::filesystem::path& p) const { write_text(p, str()); }
};

/// Parses a CsvTable written by CsvTable::write (no quoting).
inline CsvTable read_csv(const std::filesystem::path& p) {
  CsvTable t;
  std::istringstream in(read_text(p));
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.provenance[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (t.header.empty()) {
      t.header = split(line);
    } else if (!line.empty()) {
      t.add(split(line));
    }
  }
  if (t.header.empty()) throw IoError("empty csv: " + p.string());
  return t;
}

}  // namespace freqdoor
