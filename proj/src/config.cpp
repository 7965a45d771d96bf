#include "drift/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <tomlplusplus/toml.hpp>

#include "drift/error.hpp"

namespace drift {

namespace {

class Reader {
 public:
  explicit Reader(std::string_view source) : source_(source) {}

  [[noreturn]] void fail(const toml::node* node, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    if (node != nullptr && node->source().begin) {
      os << ':' << node->source().begin.line << ':' << node->source().begin.column;
    }
    os << ": " << msg;
    throw InputError(os.str());
  }

  double number(const toml::node* node, const std::string& what) const {
    if (node == nullptr) fail(node, "missing field '" + what + "'");
    if (auto v = node->value<double>()) return *v;
    fail(node, "field '" + what + "' must be a number");
  }

  int integer(const toml::node* node, const std::string& what) const {
    if (node == nullptr) fail(node, "missing field '" + what + "'");
    if (auto v = node->as_integer()) return int(v->get());
    if (auto v = node->as_floating_point()) {
      const double x = v->get();
      if (x == std::floor(x)) return int(x);
    }
    fail(node, "field '" + what + "' must be an integer");
  }

  const toml::array& array(const toml::node* node, const std::string& what) const {
    if (node == nullptr) fail(node, "missing field '" + what + "'");
    const auto* arr = node->as_array();
    if (arr == nullptr) fail(node, "field '" + what + "' must be an array");
    return *arr;
  }

  std::vector<int> int_list(const toml::node* node, const std::string& what) const {
    std::vector<int> out;
    if (node == nullptr) return out;
    for (const auto& e : array(node, what)) out.push_back(integer(&e, what));
    return out;
  }

  std::string_view source_;
};

RotorSpec read_rotor(const Reader& r, const toml::table& root) {
  const toml::node* node = root.get("rotor");
  if (node == nullptr || !node->is_table()) r.fail(node, "missing [rotor] table");
  const toml::table& t = *node->as_table();
  const auto& coeffs = r.array(t.get("coefficients"), "rotor.coefficients");
  std::vector<Monomial> terms;
  std::size_t dim = 0;
  if (const toml::node* d = t.get("dim")) dim = std::size_t(std::max(0, r.integer(d, "rotor.dim")));
  for (const auto& entry : coeffs) {
    const auto& row = r.array(&entry, "rotor.coefficients entry");
    if (row.empty()) r.fail(&entry, "rotor coefficient entry is empty");
    Monomial m;
    m.coef = r.number(row.get(0), "rotor coefficient");
    for (std::size_t j = 1; j < row.size(); ++j) {
      m.exps.push_back(r.integer(row.get(j), "rotor exponent"));
    }
    if (dim == 0) dim = m.exps.size();
    if (m.exps.size() != dim) {
      r.fail(&entry, "rotor monomial has " + std::to_string(m.exps.size()) +
                         " exponents, expected " + std::to_string(dim));
    }
    terms.push_back(std::move(m));
  }
  try {
    return RotorSpec(dim, std::move(terms));
  } catch (const InputError& e) {
    r.fail(node, e.what());
  }
}

std::vector<PendulumSpec> read_pendulums(const Reader& r, const toml::table& root) {
  const toml::node* node = root.get("pendulum");
  if (node == nullptr) r.fail(node, "missing [[pendulum]] entries");
  const auto* arr = node->as_array();
  if (arr == nullptr) r.fail(node, "'pendulum' must be an array of tables ([[pendulum]])");
  std::vector<PendulumSpec> out;
  for (const auto& entry : *arr) {
    const auto* t = entry.as_table();
    if (t == nullptr) r.fail(&entry, "pendulum entry must be a table");
    std::vector<FourierTerm> terms;
    for (const auto& c : r.array(t->get("fourier_coeffs"), "pendulum.fourier_coeffs")) {
      const auto& row = r.array(&c, "fourier_coeffs entry");
      if (row.size() != 3) r.fail(&c, "fourier_coeffs entries are [k, cos_amp, sin_amp]");
      terms.push_back({r.integer(row.get(0), "harmonic k"), r.number(row.get(1), "cos_amp"),
                       r.number(row.get(2), "sin_amp")});
    }
    const int sign = r.integer(t->get("sign"), "pendulum.sign");
    const int branch = t->contains("branch") ? r.integer(t->get("branch"), "pendulum.branch") : 1;
    try {
      out.emplace_back(std::move(terms), sign, branch);
    } catch (const InputError& e) {
      r.fail(&entry, e.what());
    }
  }
  return out;
}

PerturbationSpec read_perturbation(const Reader& r, const toml::table& root) {
  const toml::node* node = root.get("perturbation");
  if (node == nullptr) return {};
  const auto* t = node->as_table();
  if (t == nullptr) r.fail(node, "'perturbation' must be a table");
  const toml::node* modes_node = t->get("mode");
  if (modes_node == nullptr) return {};
  const auto* arr = modes_node->as_array();
  if (arr == nullptr) r.fail(modes_node, "use [[perturbation.mode]] for perturbation modes");
  std::vector<Mode> modes;
  for (const auto& entry : *arr) {
    const auto* mt = entry.as_table();
    if (mt == nullptr) r.fail(&entry, "perturbation mode must be a table");
    Mode m;
    m.k = r.int_list(mt->get("k"), "mode.k");
    m.l = r.int_list(mt->get("l"), "mode.l");
    m.m = mt->contains("m") ? r.integer(mt->get("m"), "mode.m") : 0;
    m.amplitude = r.number(mt->get("amplitude"), "mode.amplitude");
    m.phase = mt->contains("phase") ? r.number(mt->get("phase"), "mode.phase") : 0.0;
    modes.push_back(std::move(m));
  }
  return PerturbationSpec(std::move(modes));
}

}  // namespace

SystemSpec parse_model(std::string_view text, std::string_view source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": "
       << e.description();
    throw InputError(os.str());
  }
  Reader r(source);
  const double epsilon = root.contains("epsilon") ? r.number(root.get("epsilon"), "epsilon") : 0.0;
  RotorSpec rotor = read_rotor(r, root);
  std::vector<PendulumSpec> pendulums = read_pendulums(r, root);
  PerturbationSpec pert = read_perturbation(r, root);
  try {
    return SystemSpec(std::move(rotor), std::move(pendulums), std::move(pert), epsilon);
  } catch (const InputError& e) {
    throw InputError(std::string(source) + ": " + e.what());
  }
}

SystemSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str(), path);
}

namespace {

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  std::string s = os.str();
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void write_ints(std::ostream& os, const std::vector<int>& v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
}

}  // namespace

std::string format_model(const SystemSpec& spec) {
  std::ostringstream os;
  os << "epsilon = " << num(spec.epsilon()) << "\n\n";
  os << "[rotor]\ndim = " << spec.d() << "\ncoefficients = [";
  const auto& terms = spec.rotor().coefficients();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    os << (i ? ", " : "") << '[' << num(terms[i].coef);
    for (int e : terms[i].exps) os << ", " << e;
    os << ']';
  }
  os << "]\n";
  for (const auto& p : spec.pendulums()) {
    os << "\n[[pendulum]]\nsign = " << p.sign() << "\nbranch = " << p.branch()
       << "\nfourier_coeffs = [";
    const auto& fc = p.fourier_coeffs();
    for (std::size_t i = 0; i < fc.size(); ++i) {
      os << (i ? ", " : "") << '[' << fc[i].k << ", " << num(fc[i].cos_amp) << ", "
         << num(fc[i].sin_amp) << ']';
    }
    os << "]\n";
  }
  for (const auto& m : spec.perturbation().modes()) {
    os << "\n[[perturbation.mode]]\nk = ";
    write_ints(os, m.k);
    os << "\nl = ";
    write_ints(os, m.l);
    os << "\nm = " << m.m << "\namplitude = " << num(m.amplitude) << "\nphase = " << num(m.phase)
       << '\n';
  }
  return os.str();
}

void save_model(const std::string& path, const SystemSpec& spec) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file '" + path + "'");
  out << format_model(spec);
}

}  // namespace drift
