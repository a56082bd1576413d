#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace swingid {

// 0-based bus index. Case files and reports use 1-based labels.
struct BusId {
  std::size_t index = 0;

  constexpr std::size_t label() const { return index + 1; }
  static constexpr BusId from_label(std::size_t label) { return BusId{label - 1}; }

  friend constexpr auto operator<=>(BusId, BusId) = default;
};

enum class BusKind { generator, load };

std::string_view to_string(BusKind kind);

// Known system structure: topology, susceptances and power injections.
// Immutable once constructed; the constructor validates every invariant.
class GridModel {
 public:
  // injection[i] is P^M_i for generator buses and P^L_i for load buses.
  GridModel(Eigen::MatrixXd susceptance, std::vector<BusId> generators,
            std::vector<BusId> loads, std::vector<double> injection,
            std::string name = {});

  std::size_t n_buses() const { return kinds_.size(); }
  const std::vector<BusId>& generator_buses() const { return generators_; }
  const std::vector<BusId>& load_buses() const { return loads_; }
  const Eigen::MatrixXd& susceptance() const { return susceptance_; }
  const std::string& name() const { return name_; }

  BusKind kind(BusId bus) const;
  bool is_generator(BusId bus) const { return kind(bus) == BusKind::generator; }
  double injection(BusId bus) const;

  // Position of a generator bus within generator_buses(), i.e. its omega column.
  std::size_t generator_slot(BusId bus) const;

  bool operator==(const GridModel& other) const;

 private:
  Eigen::MatrixXd susceptance_;
  std::vector<BusId> generators_;
  std::vector<BusId> loads_;
  std::vector<double> injection_;
  std::vector<BusKind> kinds_;
  std::vector<std::size_t> slots_;
  std::string name_;
};

// Inertia is defined on generator buses only; damping on every bus.
struct TrueParameters {
  std::map<BusId, double> inertia;
  std::map<BusId, double> damping;

  double M(BusId bus) const;
  double D(BusId bus) const;

  void validate(const GridModel& model) const;
  bool operator==(const TrueParameters&) const = default;
};

struct Case {
  GridModel model;
  TrueParameters params;
  std::string note;

  bool operator==(const Case&) const = default;
};

Case parse_case(std::string_view json_text);
Case load_case(const std::filesystem::path& path);

// Serializes to the case JSON schema. parse_case(emit_case(c)) == c.
std::string emit_case(const Case& c);
void save_case(const Case& c, const std::filesystem::path& path);

// Buses j with B(bus, j) != 0, ascending.
std::vector<BusId> neighbors(const GridModel& model, BusId bus);

}  // namespace swingid
