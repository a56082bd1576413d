#include "swingid/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "swingid/error.hpp"

namespace swingid {

namespace {

using json = nlohmann::json;

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorCode::invalid_case, what);
}

std::string bus_str(BusId b) { return "bus " + std::to_string(b.label()); }

bool connected(const Eigen::MatrixXd& b) {
  const auto n = static_cast<std::size_t>(b.rows());
  if (n == 0) return false;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < n; ++j) {
      if (!seen[j] && b(i, j) != 0.0) {
        seen[j] = true;
        ++count;
        stack.push_back(j);
      }
    }
  }
  return count == n;
}

BusId label_to_bus(std::size_t label, std::size_t n, const char* field) {
  if (label < 1 || label > n) {
    invalid(std::string(field) + ": bus label " + std::to_string(label) +
            " outside 1.." + std::to_string(n));
  }
  return BusId::from_label(label);
}

// Keys of the per-bus maps are stringified 1-based labels.
std::map<BusId, double> parse_bus_map(const json& obj, std::size_t n, const char* field) {
  if (!obj.is_object()) invalid(std::string(field) + " must be an object");
  std::map<BusId, double> out;
  for (const auto& [key, value] : obj.items()) {
    std::size_t label = 0;
    try {
      std::size_t pos = 0;
      label = std::stoul(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      invalid(std::string(field) + ": key '" + key + "' is not a bus label");
    }
    if (!value.is_number()) invalid(std::string(field) + "[" + key + "] must be a number");
    out[label_to_bus(label, n, field)] = value.get<double>();
  }
  return out;
}

json bus_map_json(const std::map<BusId, double>& m) {
  json out = json::object();
  for (const auto& [bus, v] : m) out[std::to_string(bus.label())] = v;
  return out;
}

}  // namespace

std::string_view to_string(BusKind kind) {
  return kind == BusKind::generator ? "gen" : "load";
}

GridModel::GridModel(Eigen::MatrixXd susceptance, std::vector<BusId> generators,
                     std::vector<BusId> loads, std::vector<double> injection,
                     std::string name)
    : susceptance_(std::move(susceptance)),
      generators_(std::move(generators)),
      loads_(std::move(loads)),
      injection_(std::move(injection)),
      name_(std::move(name)) {
  const auto n = static_cast<std::size_t>(susceptance_.rows());
  if (n == 0 || susceptance_.cols() != susceptance_.rows()) {
    invalid("susceptance must be a nonempty square matrix");
  }
  if (injection_.size() != n) invalid("injection vector must have one entry per bus");

  std::sort(generators_.begin(), generators_.end());
  std::sort(loads_.begin(), loads_.end());

  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<int> owner(n, -1);
  kinds_.assign(n, BusKind::load);
  slots_.assign(n, unset);
  for (std::size_t g = 0; g < generators_.size(); ++g) {
    const auto b = generators_[g];
    if (b.index >= n) invalid("generator " + bus_str(b) + " out of range");
    if (owner[b.index] != -1) invalid(bus_str(b) + " listed twice as generator");
    owner[b.index] = 0;
    kinds_[b.index] = BusKind::generator;
    slots_[b.index] = g;
  }
  for (const auto b : loads_) {
    if (b.index >= n) invalid("load " + bus_str(b) + " out of range");
    if (owner[b.index] == 0) invalid(bus_str(b) + " is both generator and load");
    if (owner[b.index] == 1) invalid(bus_str(b) + " listed twice as load");
    owner[b.index] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] == -1) invalid(bus_str(BusId{i}) + " is neither generator nor load");
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(injection_[i])) invalid("non-finite injection at " + bus_str(BusId{i}));
    if (susceptance_(i, i) != 0.0) {
      invalid("nonzero diagonal susceptance at " + bus_str(BusId{i}));
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      const double bij = susceptance_(i, j);
      const double bji = susceptance_(j, i);
      if (!std::isfinite(bij) || !std::isfinite(bji)) {
        invalid("non-finite susceptance on line " + std::to_string(i + 1) + "-" +
                std::to_string(j + 1));
      }
      if (std::abs(bij - bji) > 1e-12 * std::max(1.0, std::abs(bij))) {
        std::ostringstream os;
        os.precision(17);
        os << "asymmetric susceptance on line " << i + 1 << "-" << j + 1 << ": B(" << i + 1
           << "," << j + 1 << ")=" << bij << " but B(" << j + 1 << "," << i + 1 << ")=" << bji;
        invalid(os.str());
      }
    }
  }
  if (!connected(susceptance_)) invalid("network graph is disconnected");
}

BusKind GridModel::kind(BusId bus) const {
  if (bus.index >= n_buses()) {
    throw Error(ErrorCode::precondition, bus_str(bus) + " out of range");
  }
  return kinds_[bus.index];
}

double GridModel::injection(BusId bus) const {
  kind(bus);
  return injection_[bus.index];
}

std::size_t GridModel::generator_slot(BusId bus) const {
  if (kind(bus) != BusKind::generator) {
    throw Error(ErrorCode::precondition, bus_str(bus) + " is not a generator bus");
  }
  return slots_[bus.index];
}

bool GridModel::operator==(const GridModel& other) const {
  return susceptance_ == other.susceptance_ && generators_ == other.generators_ &&
         loads_ == other.loads_ && injection_ == other.injection_ && name_ == other.name_;
}

double TrueParameters::M(BusId bus) const {
  const auto it = inertia.find(bus);
  if (it == inertia.end()) throw Error(ErrorCode::precondition, "no inertia for " + bus_str(bus));
  return it->second;
}

double TrueParameters::D(BusId bus) const {
  const auto it = damping.find(bus);
  if (it == damping.end()) throw Error(ErrorCode::precondition, "no damping for " + bus_str(bus));
  return it->second;
}

void TrueParameters::validate(const GridModel& model) const {
  for (const auto& [bus, m] : inertia) {
    if (bus.index >= model.n_buses() || !model.is_generator(bus)) {
      invalid("inertia given for non-generator " + bus_str(bus));
    }
    if (!(m > 0.0) || !std::isfinite(m)) invalid("nonpositive inertia M at " + bus_str(bus));
  }
  for (const auto& [bus, d] : damping) {
    if (bus.index >= model.n_buses()) invalid("damping given for unknown " + bus_str(bus));
    if (!(d > 0.0) || !std::isfinite(d)) invalid("nonpositive damping D at " + bus_str(bus));
  }
  for (const auto g : model.generator_buses()) {
    if (!inertia.contains(g)) invalid("missing inertia M for generator " + bus_str(g));
  }
  for (std::size_t i = 0; i < model.n_buses(); ++i) {
    if (!damping.contains(BusId{i})) invalid("missing damping D for " + bus_str(BusId{i}));
  }
}

Case parse_case(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, std::string("case JSON: ") + e.what());
  }
  try {
    const auto n = doc.at("n_buses").get<std::size_t>();
    if (n == 0) invalid("n_buses must be positive");

    std::vector<BusId> gens;
    for (const auto& v : doc.at("generators")) gens.push_back(label_to_bus(v.get<std::size_t>(), n, "generators"));
    std::vector<BusId> loads;
    for (const auto& v : doc.at("loads")) loads.push_back(label_to_bus(v.get<std::size_t>(), n, "loads"));

    const auto& rows = doc.at("susceptance");
    if (!rows.is_array() || rows.size() != n) invalid("susceptance must have n_buses rows");
    Eigen::MatrixXd b(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!rows[i].is_array() || rows[i].size() != n) {
        invalid("susceptance row " + std::to_string(i + 1) + " must have n_buses entries");
      }
      for (std::size_t j = 0; j < n; ++j) b(i, j) = rows[i][j].get<double>();
    }

    std::vector<bool> is_gen(n, false);
    for (const auto g : gens) is_gen[g.index] = true;
    std::vector<double> injection(n, 0.0);
    std::vector<bool> given(n, false);
    for (const auto& [bus, p] : parse_bus_map(doc.at("p_mech"), n, "p_mech")) {
      if (!is_gen[bus.index]) invalid("p_mech given for non-generator " + bus_str(bus));
      injection[bus.index] = p;
      given[bus.index] = true;
    }
    for (const auto& [bus, p] : parse_bus_map(doc.at("p_load"), n, "p_load")) {
      if (is_gen[bus.index]) invalid("p_load given for generator " + bus_str(bus));
      injection[bus.index] = p;
      given[bus.index] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!given[i]) {
        invalid(std::string(is_gen[i] ? "p_mech" : "p_load") + " missing for " + bus_str(BusId{i}));
      }
    }

    GridModel model(std::move(b), std::move(gens), std::move(loads), std::move(injection),
                    doc.value("name", std::string{}));

    const auto& tp = doc.at("true_params");
    TrueParameters params{parse_bus_map(tp.at("M"), n, "true_params.M"),
                          parse_bus_map(tp.at("D"), n, "true_params.D")};
    params.validate(model);
    return Case{std::move(model), std::move(params), doc.value("note", std::string{})};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse, std::string("case JSON: ") + e.what());
  }
}

Case load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open case file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_case(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.filename().string() + ": " + e.what());
  }
}

std::string emit_case(const Case& c) {
  const auto& m = c.model;
  const auto n = m.n_buses();
  nlohmann::ordered_json doc;
  if (!m.name().empty()) doc["name"] = m.name();
  if (!c.note.empty()) doc["note"] = c.note;
  doc["n_buses"] = n;
  doc["generators"] = json::array();
  for (const auto g : m.generator_buses()) doc["generators"].push_back(g.label());
  doc["loads"] = json::array();
  for (const auto l : m.load_buses()) doc["loads"].push_back(l.label());
  auto rows = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    auto row = json::array();
    for (std::size_t j = 0; j < n; ++j) row.push_back(m.susceptance()(i, j));
    rows.push_back(std::move(row));
  }
  doc["susceptance"] = std::move(rows);
  std::map<BusId, double> pm, pl;
  for (const auto g : m.generator_buses()) pm[g] = m.injection(g);
  for (const auto l : m.load_buses()) pl[l] = m.injection(l);
  doc["p_mech"] = bus_map_json(pm);
  doc["p_load"] = bus_map_json(pl);
  doc["true_params"] = {{"M", bus_map_json(c.params.inertia)}, {"D", bus_map_json(c.params.damping)}};
  return doc.dump(2) + "\n";
}

void save_case(const Case& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write case file " + path.string());
  out << emit_case(c);
}

std::vector<BusId> neighbors(const GridModel& model, BusId bus) {
  if (bus.index >= model.n_buses()) {
    throw Error(ErrorCode::precondition, bus_str(bus) + " out of range");
  }
  std::vector<BusId> out;
  const auto& b = model.susceptance();
  for (std::size_t j = 0; j < model.n_buses(); ++j) {
    if (j != bus.index && b(bus.index, j) != 0.0) out.push_back(BusId{j});
  }
  return out;
}

}  // namespace swingid
