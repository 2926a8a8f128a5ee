#include "rarsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rarsim {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void write_records_csv(const std::vector<PatientRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "stage,z,arm,outcome\n";
  for (const PatientRecord& r : records) {
    out << r.stage << ',' << r.z << ',' << r.arm << ',' << r.outcome << '\n';
  }
}

std::vector<PatientRecord> read_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open records file: " + path);
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line).size() != 4)
    throw std::runtime_error("records file lacks the stage,z,arm,outcome "
                             "header: " + path);
  std::vector<PatientRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected 4 fields");
    PatientRecord r;
    r.stage = std::stoi(fields[0]);
    r.z = std::stoi(fields[1]);
    r.arm = std::stoi(fields[2]);
    r.outcome = std::stoi(fields[3]);
    if (r.stage < 1 || (r.z != 0 && r.z != 1) || r.arm < 0 ||
        (r.outcome != 0 && r.outcome != 1))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": invalid record values");
    records.push_back(r);
  }
  if (records.empty())
    throw std::runtime_error("records file holds no patients: " + path);
  return records;
}

void write_block_probabilities_csv(const Eigen::MatrixXd& probs,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "block";
  for (int k = 0; k < probs.cols(); ++k) out << ",pi_" << k;
  out << '\n';
  for (int j = 0; j < probs.rows(); ++j) {
    out << (j + 1);
    for (int k = 0; k < probs.cols(); ++k)
      out << ',' << format_double(probs(j, k));
    out << '\n';
  }
}

Eigen::MatrixXd read_block_probabilities_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sidecar file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty sidecar file: " + path);
  const int n_arms = static_cast<int>(split_csv_line(line).size()) - 1;
  if (n_arms < 2)
    throw std::runtime_error("sidecar needs a block column and >= 2 arms: " +
                             path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != n_arms + 1)
      throw std::runtime_error("ragged sidecar row in " + path);
    std::vector<double> row(n_arms);
    for (int k = 0; k < n_arms; ++k) row[k] = std::stod(fields[k + 1]);
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd probs(static_cast<int>(rows.size()), n_arms);
  for (int j = 0; j < probs.rows(); ++j)
    for (int k = 0; k < n_arms; ++k) probs(j, k) = rows[j][k];
  return probs;
}

TrialResult assemble_trial(std::vector<PatientRecord> records,
                           Eigen::MatrixXd block_probs) {
  TrialResult t;
  t.stages = static_cast<int>(block_probs.rows());
  t.n_experimental = static_cast<int>(block_probs.cols()) - 1;
  if (t.stages < 1 || records.size() % t.stages != 0)
    throw std::runtime_error(
        "trial records do not divide evenly into the sidecar's blocks");
  t.block_size = static_cast<int>(records.size()) / t.stages;
  t.final_states.assign(t.n_experimental + 1, ArmState{});
  for (const PatientRecord& r : records) {
    if (r.arm > t.n_experimental)
      throw std::runtime_error("record arm index exceeds sidecar arm count");
    if (r.outcome == 1) {
      t.final_states[r.arm].successes += 1;
    } else {
      t.final_states[r.arm].failures += 1;
    }
  }
  t.z_statistics.resize(t.n_experimental);
  const int n0 = t.final_states[0].n();
  for (int k = 1; k <= t.n_experimental; ++k) {
    const int nk = t.final_states[k].n();
    t.z_statistics[k - 1] =
        (n0 >= 1 && nk >= 1)
            ? z_test(t.final_states[0].successes, n0,
                     t.final_states[k].successes, nk)
                  .statistic
            : 0.0;
  }
  t.records = std::move(records);
  t.block_probabilities = std::move(block_probs);
  return t;
}

std::string results_csv_header() {
  return "rule,K,T,b,J,scenario,alpha_or_power,se,p_star,p_star_se,ens,ens_se,"
         "delta_ens,delta_ens_se,runtime_s,seed";
}

std::string results_csv_row(const std::string& rule, int n_experimental,
                            int total, int block_size, int stages,
                            const std::string& scenario,
                            const OperatingCharacteristics& oc,
                            double runtime_seconds, std::uint64_t seed) {
  std::ostringstream out;
  out << rule << ',' << n_experimental << ',' << total << ',' << block_size
      << ',' << stages << ',' << scenario << ','
      << format_double(oc.rejection_rate) << ','
      << format_double(oc.rejection_se) << ',' << format_double(oc.p_star)
      << ',' << format_double(oc.p_star_se) << ',' << format_double(oc.ens)
      << ',' << format_double(oc.ens_se) << ','
      << (std::isnan(oc.delta_ens) ? "" : format_double(oc.delta_ens)) << ','
      << (std::isnan(oc.delta_ens_se) ? "" : format_double(oc.delta_ens_se))
      << ',';
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", runtime_seconds);
  out << buf << ',' << seed;
  return out.str();
}

std::string glm_csv_header() {
  return "study,method,coefficient,true_value,mean_estimate,mse,reject_rate,"
         "n_finite,n_separated,replicates";
}

std::string glm_csv_row(const std::string& study, const std::string& method,
                        const GlmStudyRow& row) {
  std::ostringstream out;
  out << study << ',' << method << ',' << row.coefficient << ','
      << format_double(row.true_value) << ','
      << format_double(row.mean_estimate) << ',' << format_double(row.mse)
      << ',' << format_double(row.reject_rate) << ',' << row.n_finite << ','
      << row.n_separated << ',' << row.replicates;
  return out.str();
}

}  // namespace rarsim
