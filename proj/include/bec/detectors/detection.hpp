#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bec/util/text.hpp"

namespace bec {

using TypeId = std::size_t;
using Metadata = std::map<std::string, std::string>;

struct Detection {
  TypeId type_id = 0;
  double score = 0.0;  // [0, 1]
  Metadata metadata;
};

struct DetectorFailure {
  std::string detector;
  std::string message;
};

struct DetectionVector {
  std::vector<double> d;               // one component per detection type
  std::vector<Detection> detections;   // backing the nonzero components
  bool short_circuited = false;
  std::vector<DetectorFailure> failures;

  std::size_t nonzero_count() const {
    std::size_t n = 0;
    for (double v : d) n += v != 0.0;
    return n;
  }
};

enum class DetectorKind { malicious_signal, benign_gate };
enum class CostClass { cheap, expensive };

inline std::string_view to_string(DetectorKind k) { return k == DetectorKind::benign_gate ? "benign_gate" : "malicious_signal"; }
inline std::string_view to_string(CostClass c) { return c == CostClass::cheap ? "cheap" : "expensive"; }

struct DetectorDescriptor {
  TypeId type_id = 0;
  std::string name;
  DetectorKind kind = DetectorKind::malicious_signal;
  CostClass cost_class = CostClass::cheap;
  bool enabled = true;
  std::string model_card;  // markdown text, filled by load_model_cards()
};

// Built-in detection types. The registry manifest is authoritative for ids;
// these names are how the code finds them.
namespace types {
inline constexpr std::string_view kFrequentCommunication = "frequent_communication";
inline constexpr std::string_view kRareCommunication = "rare_communication";
inline constexpr std::string_view kAddressMasquerade = "address_masquerade";
inline constexpr std::string_view kUnicodeMasquerade = "unicode_masquerade";
inline constexpr std::string_view kZeroWidthAbuse = "zero_width_abuse";
inline constexpr std::string_view kCallToAction = "call_to_action";
inline constexpr std::string_view kUrgency = "urgency";
inline constexpr std::string_view kCredentialRequest = "credential_request";
}  // namespace types

/// The detector registry manifest fixes the dimension m of the detection
/// vector for a model version.
///
/// Text format:
///   # comment
///   manifest_version <string>
///   <type_id> <name> <benign_gate|malicious_signal> <cheap|expensive> <0|1>
class RegistryManifest {
 public:
  RegistryManifest() = default;
  RegistryManifest(std::string version, std::vector<DetectorDescriptor> types)
      : version_(std::move(version)), types_(std::move(types)) {
    validate();
  }

  const std::string& version() const { return version_; }
  std::size_t dimension() const { return types_.size(); }
  const std::vector<DetectorDescriptor>& types() const { return types_; }
  std::vector<DetectorDescriptor>& mutable_types() { return types_; }

  const DetectorDescriptor& at(TypeId id) const { return types_.at(id); }

  std::optional<TypeId> find(std::string_view name) const {
    for (const auto& t : types_) {
      if (t.name == name) return t.type_id;
    }
    return std::nullopt;
  }

  TypeId require(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw std::runtime_error("detection type '" + std::string(name) + "' not in manifest " + version_);
  }

  std::string name_of(TypeId id) const { return id < types_.size() ? types_[id].name : "type_" + std::to_string(id); }

  static RegistryManifest parse(std::istream& in) {
    std::string version;
    std::vector<DetectorDescriptor> types;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view l = text::trim(line);
      if (l.empty() || l[0] == '#') continue;
      std::istringstream fields{std::string(l)};
      std::string first;
      fields >> first;
      if (first == "manifest_version") {
        fields >> version;
        continue;
      }
      DetectorDescriptor d;
      std::string kind, cost;
      int enabled = 1;
      auto id = text::parse_number<TypeId>(first);
      if (!id || !(fields >> d.name >> kind >> cost >> enabled)) {
        throw std::runtime_error("manifest line " + std::to_string(line_no) + ": expected '<id> <name> <kind> <cost> <enabled>'");
      }
      d.type_id = *id;
      if (kind == "benign_gate") d.kind = DetectorKind::benign_gate;
      else if (kind == "malicious_signal") d.kind = DetectorKind::malicious_signal;
      else throw std::runtime_error("manifest line " + std::to_string(line_no) + ": unknown kind '" + kind + "'");
      if (cost == "cheap") d.cost_class = CostClass::cheap;
      else if (cost == "expensive") d.cost_class = CostClass::expensive;
      else throw std::runtime_error("manifest line " + std::to_string(line_no) + ": unknown cost class '" + cost + "'");
      d.enabled = enabled != 0;
      types.push_back(std::move(d));
    }
    if (version.empty()) throw std::runtime_error("manifest has no manifest_version line");
    return RegistryManifest(std::move(version), std::move(types));
  }

  static RegistryManifest load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path);
    return parse(in);
  }

  void write(std::ostream& out) const {
    out << "# bec detector registry manifest\n";
    out << "manifest_version " << version_ << "\n";
    out << "# type_id name kind cost_class enabled\n";
    for (const auto& t : types_) {
      out << t.type_id << " " << t.name << " " << to_string(t.kind) << " " << to_string(t.cost_class) << " "
          << (t.enabled ? 1 : 0) << "\n";
    }
  }

  /// Reads docs/model-cards/<name>.md for every type. Throws if one is missing.
  void load_model_cards(const std::string& dir) {
    for (auto& t : types_) {
      std::ifstream in(dir + "/" + t.name + ".md");
      if (!in) throw std::runtime_error("detector '" + t.name + "' has no model card in " + dir);
      std::ostringstream ss;
      ss << in.rdbuf();
      t.model_card = ss.str();
    }
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < types_.size(); ++i) {
      if (types_[i].type_id != i) {
        throw std::runtime_error("manifest type ids must be dense and ordered; expected " + std::to_string(i) +
                                 " got " + std::to_string(types_[i].type_id));
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (types_[j].name == types_[i].name) throw std::runtime_error("duplicate detection type " + types_[i].name);
      }
    }
  }

  std::string version_;
  std::vector<DetectorDescriptor> types_;
};

/// The eight built-in detection types in their canonical order.
inline RegistryManifest default_manifest() {
  using enum DetectorKind;
  using enum CostClass;
  return RegistryManifest(
      "1", {
               {0, std::string(types::kFrequentCommunication), benign_gate, cheap, true, {}},
               {1, std::string(types::kRareCommunication), malicious_signal, cheap, true, {}},
               {2, std::string(types::kAddressMasquerade), malicious_signal, cheap, true, {}},
               {3, std::string(types::kUnicodeMasquerade), malicious_signal, cheap, true, {}},
               {4, std::string(types::kZeroWidthAbuse), malicious_signal, cheap, true, {}},
               {5, std::string(types::kCallToAction), malicious_signal, expensive, true, {}},
               {6, std::string(types::kUrgency), malicious_signal, expensive, true, {}},
               {7, std::string(types::kCredentialRequest), malicious_signal, expensive, true, {}},
           });
}

}  // namespace bec
