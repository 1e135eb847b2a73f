// Text checkpoint, format version 1. Layout (one item per line):
//
//   stlf-checkpoint 1
//   cell <gru|lstm>
//   input_dim <D>
//   layers <count> <H1> ...
//   dense <count> <S1> ... 1
//   seed <u64>
//   window <n_points> <scheme> <k> [<kind> <lead_hours>]...     (or "window none")
//   scaler <rows>
//   row <index> <min> <max> <scaled|passthrough>                 (x rows)
//   target <min> <max>
//   loss_trace <count> <v>...
//   tensor <name> <rows> <cols>                                   (per block)
//   <row-major values, one matrix row per line>
//   end
//
// Reals are written with 17 significant digits and read back bit-exactly.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stlf/error.hpp"
#include "stlf/neural.hpp"

namespace stlf::neural {

namespace {

constexpr int kFormatVersion = 1;

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << real(m(i, j));
    out << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError("checkpoint truncated");
    return w;
  }
  void expect(const std::string& key) {
    const auto w = word();
    if (w != key) throw DataError("checkpoint: expected '" + key + "', found '" + w + "'");
  }
  long integer() {
    const auto w = word();
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(w, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != w.size()) throw DataError("checkpoint: expected integer, found '" + w + "'");
    return v;
  }
  double number() {
    const auto w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) throw DataError("checkpoint: expected number, found '" + w + "'");
    return v;
  }
  Eigen::MatrixXd tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    expect("tensor");
    expect(name);
    if (integer() != rows || integer() != cols) throw DataError("checkpoint: tensor " + name + " has wrong shape");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number();
    }
    return m;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(std::ostream& out, const TrainedModel& tm) {
  const auto& cfg = tm.model.config;
  out << "stlf-checkpoint " << kFormatVersion << '\n';
  out << "cell " << to_string(cfg.cell) << '\n';
  out << "input_dim " << cfg.input_dim << '\n';
  out << "layers " << cfg.layer_sizes.size();
  for (int s : cfg.layer_sizes) out << ' ' << s;
  out << "\ndense " << cfg.dense_sizes.size();
  for (int s : cfg.dense_sizes) out << ' ' << s;
  out << "\nseed " << cfg.seed << '\n';
  if (tm.window) {
    const auto conds = tm.window->active_conditions();
    out << "window " << tm.window->n_points << ' ' << features::to_string(tm.window->scheme) << ' ' << conds.size();
    for (const auto& c : conds) out << ' ' << features::to_string(c.kind) << ' ' << real(c.lead_hours);
    out << '\n';
  } else {
    out << "window none\n";
  }
  out << "scaler " << tm.scaler.rows.size() << '\n';
  for (std::size_t r = 0; r < tm.scaler.rows.size(); ++r) {
    out << "row " << r << ' ' << real(tm.scaler.rows[r].min) << ' ' << real(tm.scaler.rows[r].max) << ' '
        << (tm.scaler.passthrough[r] ? "passthrough" : "scaled") << '\n';
  }
  out << "target " << real(tm.scaler.target.min) << ' ' << real(tm.scaler.target.max) << '\n';
  out << "loss_trace " << tm.loss_trace.size();
  for (double v : tm.loss_trace) out << ' ' << real(v);
  out << '\n';
  for (std::size_t l = 0; l < tm.model.params.recurrent.size(); ++l) {
    const auto& p = tm.model.params.recurrent[l];
    const std::string pre = "recurrent." + std::to_string(l) + ".";
    write_tensor(out, pre + "W", p.W);
    write_tensor(out, pre + "U", p.U);
    write_tensor(out, pre + "b", p.b);
  }
  for (std::size_t k = 0; k < tm.model.params.dense.size(); ++k) {
    const auto& d = tm.model.params.dense[k];
    const std::string pre = "dense." + std::to_string(k) + ".";
    write_tensor(out, pre + "W", d.W);
    write_tensor(out, pre + "b", d.b);
  }
  out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  save_checkpoint(out, model);
}

TrainedModel load_checkpoint(std::istream& in) {
  Reader rd(in);
  rd.expect("stlf-checkpoint");
  if (const long v = rd.integer(); v != kFormatVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(v));
  }
  ModelConfig cfg;
  rd.expect("cell");
  try {
    cfg.cell = parse_cell_kind(rd.word());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  rd.expect("input_dim");
  cfg.input_dim = static_cast<int>(rd.integer());
  rd.expect("layers");
  cfg.layer_sizes.assign(static_cast<std::size_t>(rd.integer()), 0);
  for (auto& s : cfg.layer_sizes) s = static_cast<int>(rd.integer());
  rd.expect("dense");
  cfg.dense_sizes.assign(static_cast<std::size_t>(rd.integer()), 0);
  for (auto& s : cfg.dense_sizes) s = static_cast<int>(rd.integer());
  rd.expect("seed");
  cfg.seed = std::stoull(rd.word());
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }

  TrainedModel tm;
  rd.expect("window");
  if (const auto w = rd.word(); w != "none") {
    features::WindowSpec spec;
    spec.n_points = std::stoi(w);
    spec.scheme = features::parse_scheme(rd.word());
    const long k = rd.integer();
    for (long i = 0; i < k; ++i) {
      features::TemperatureCondition c;
      c.kind = features::parse_condition_kind(rd.word());
      c.lead_hours = rd.number();
      spec.conditions.push_back(c);
    }
    tm.window = spec;
  }
  rd.expect("scaler");
  const long rows = rd.integer();
  for (long r = 0; r < rows; ++r) {
    rd.expect("row");
    if (rd.integer() != r) throw DataError("checkpoint: scaler rows out of order");
    features::Range range{rd.number(), rd.number()};
    const auto mode = rd.word();
    if (mode != "scaled" && mode != "passthrough") throw DataError("checkpoint: bad scaler row mode '" + mode + "'");
    tm.scaler.rows.push_back(range);
    tm.scaler.passthrough.push_back(mode == "passthrough");
  }
  rd.expect("target");
  tm.scaler.target.min = rd.number();
  tm.scaler.target.max = rd.number();
  rd.expect("loss_trace");
  tm.loss_trace.assign(static_cast<std::size_t>(rd.integer()), 0.0);
  for (auto& v : tm.loss_trace) v = rd.number();

  // shapes come from the config; init_model provides correctly sized blocks
  tm.model = init_model(cfg);
  for (std::size_t l = 0; l < tm.model.params.recurrent.size(); ++l) {
    auto& p = tm.model.params.recurrent[l];
    const std::string pre = "recurrent." + std::to_string(l) + ".";
    p.W = rd.tensor(pre + "W", p.W.rows(), p.W.cols());
    p.U = rd.tensor(pre + "U", p.U.rows(), p.U.cols());
    p.b = rd.tensor(pre + "b", p.b.size(), 1);
  }
  for (std::size_t k = 0; k < tm.model.params.dense.size(); ++k) {
    auto& d = tm.model.params.dense[k];
    const std::string pre = "dense." + std::to_string(k) + ".";
    d.W = rd.tensor(pre + "W", d.W.rows(), d.W.cols());
    d.b = rd.tensor(pre + "b", d.b.size(), 1);
  }
  rd.expect("end");
  if (tm.window && tm.window->rows() != cfg.input_dim) throw DataError("checkpoint: window rows != input_dim");
  if (static_cast<int>(tm.scaler.rows.size()) != cfg.input_dim) throw DataError("checkpoint: scaler rows != input_dim");
  return tm;
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  try {
    return load_checkpoint(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace stlf::neural
