#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convoforge/common.hpp"
#include "convoforge/io.hpp"
#include "convoforge/rng.hpp"
#include "convoforge/text.hpp"

namespace convoforge::persona {

using nlohmann::json;

enum class Role { doctor, patient };

inline std::string to_string(Role r) {
  return r == Role::doctor ? "doctor" : "patient";
}

inline Role role_from_string(const std::string& s) {
  if (s == "doctor") return Role::doctor;
  if (s == "patient") return Role::patient;
  throw ValidationError("unknown role: " + s);
}

inline const std::vector<std::string>& split_names() {
  static const std::vector<std::string> names = {"train", "dev", "test"};
  return names;
}

// Role-tagged attribute record driving dialogue generation and voice casting.
struct Persona {
  std::string id;
  Role role = Role::patient;
  std::string split;
  std::string name;
  int age = 0;
  int height_cm = 0;
  int weight_kg = 0;
  std::string race;
  std::string gender;
  std::string forgetfulness;
  std::string formality;
  std::string hurriedness;
  std::string marital_status;
  // patient-only
  std::string english_fluency;
  std::string occupation;
  std::string insurance;
  std::string reason_for_visit;
  // doctor-only
  int years_experience = 0;

  bool operator==(const Persona&) const = default;

  json to_json() const {
    json j{{"id", id},
           {"role", to_string(role)},
           {"split", split},
           {"name", name},
           {"age", age},
           {"height_cm", height_cm},
           {"weight_kg", weight_kg},
           {"race", race},
           {"gender", gender},
           {"forgetfulness", forgetfulness},
           {"formality", formality},
           {"hurriedness", hurriedness},
           {"marital_status", marital_status}};
    if (role == Role::patient) {
      j["english_fluency"] = english_fluency;
      j["occupation"] = occupation;
      j["insurance"] = insurance;
      j["reason_for_visit"] = reason_for_visit;
    } else {
      j["years_experience"] = years_experience;
    }
    return j;
  }

  static Persona from_json(const json& j) {
    Persona p;
    p.id = j.at("id").get<std::string>();
    p.role = role_from_string(j.at("role").get<std::string>());
    p.split = j.at("split").get<std::string>();
    p.name = j.at("name").get<std::string>();
    p.age = j.at("age").get<int>();
    p.height_cm = j.at("height_cm").get<int>();
    p.weight_kg = j.at("weight_kg").get<int>();
    p.race = j.at("race").get<std::string>();
    p.gender = j.at("gender").get<std::string>();
    p.forgetfulness = j.at("forgetfulness").get<std::string>();
    p.formality = j.at("formality").get<std::string>();
    p.hurriedness = j.at("hurriedness").get<std::string>();
    p.marital_status = j.at("marital_status").get<std::string>();
    if (p.role == Role::patient) {
      p.english_fluency = j.at("english_fluency").get<std::string>();
      p.occupation = j.at("occupation").get<std::string>();
      p.insurance = j.at("insurance").get<std::string>();
      p.reason_for_visit = j.at("reason_for_visit").get<std::string>();
    } else {
      p.years_experience = j.at("years_experience").get<int>();
    }
    return p;
  }

  // Attribute block rendered into turn prompts.
  std::string describe() const {
    std::string s;
    s += "name: " + name + "\n";
    s += "age: " + std::to_string(age) + "\n";
    s += "height_cm: " + std::to_string(height_cm) + "\n";
    s += "weight_kg: " + std::to_string(weight_kg) + "\n";
    s += "race: " + race + "\n";
    s += "gender: " + gender + "\n";
    s += "forgetfulness: " + forgetfulness + "\n";
    s += "formality: " + formality + "\n";
    s += "hurriedness: " + hurriedness + "\n";
    s += "marital_status: " + marital_status + "\n";
    if (role == Role::patient) {
      s += "english_fluency: " + english_fluency + "\n";
      s += "occupation: " + occupation + "\n";
      s += "insurance: " + insurance + "\n";
      s += "reason_for_visit: " + reason_for_visit + "\n";
    } else {
      s += "years_experience: " + std::to_string(years_experience) + "\n";
    }
    return s;
  }
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

// Attribute value lists plus the chief-complaint list. One section per
// attribute in the catalog file; sampling weights optional (default uniform).
struct AttributeCatalog {
  std::map<std::string, std::vector<std::string>> attributes;
  std::map<std::string, std::vector<double>> weights;
  std::map<std::string, IntRange> ranges;
  std::vector<std::string> complaints;
  // opt-in: correlate names with gender instead of the flat name list
  std::map<std::string, std::vector<std::string>> names_by_gender;

  static const std::vector<std::string>& required_lists() {
    static const std::vector<std::string> req = {
        "name",          "race",       "gender",
        "forgetfulness", "formality",  "hurriedness",
        "marital_status", "english_fluency", "occupation", "insurance"};
    return req;
  }

  static const std::vector<std::string>& required_ranges() {
    static const std::vector<std::string> req = {"age", "height_cm",
                                                 "weight_kg",
                                                 "years_experience"};
    return req;
  }

  std::size_t complaint_count() const { return complaints.size(); }

  void validate() const {
    for (const auto& key : required_lists()) {
      auto it = attributes.find(key);
      if (it == attributes.end())
        throw ValidationError("missing attribute list: " + key);
      if (it->second.empty())
        throw ValidationError("empty attribute: " + key);
    }
    for (const auto& key : required_ranges()) {
      auto it = ranges.find(key);
      if (it == ranges.end())
        throw ValidationError("missing attribute range: " + key);
      if (it->second.lo > it->second.hi)
        throw ValidationError("inverted range for " + key);
    }
    if (complaints.empty()) throw ValidationError("empty attribute: complaints");
    std::set<std::string> seen;
    for (const auto& c : complaints) {
      if (!seen.insert(c).second)
        throw ValidationError("duplicate complaint: " + c);
    }
    for (const auto& [key, w] : weights) {
      auto it = attributes.find(key);
      if (it == attributes.end())
        throw ValidationError("weights for unknown attribute: " + key);
      if (w.size() != it->second.size())
        throw ValidationError("weights length mismatch for " + key);
      for (double x : w)
        if (!(x > 0.0))
          throw ValidationError("non-positive weight for " + key);
    }
  }

  const std::string& sample_value(const std::string& key, Rng& rng) const {
    const auto& values = attributes.at(key);
    auto w = weights.find(key);
    if (w != weights.end())
      return values[rng.pick_weighted(w->second)];
    return values[rng.below(values.size())];
  }

  int sample_range(const std::string& key, Rng& rng) const {
    const auto& r = ranges.at(key);
    return static_cast<int>(rng.range(r.lo, r.hi));
  }
};

inline AttributeCatalog load_catalog(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("catalog parse failure (" + path.string() +
                      "): " + e.what());
  }
  AttributeCatalog cat;
  if (j.contains("attributes"))
    for (auto& [key, values] : j.at("attributes").items())
      cat.attributes[key] = values.get<std::vector<std::string>>();
  if (j.contains("weights"))
    for (auto& [key, values] : j.at("weights").items())
      cat.weights[key] = values.get<std::vector<double>>();
  if (j.contains("ranges"))
    for (auto& [key, pair] : j.at("ranges").items()) {
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError("range for " + key + " must be [lo, hi]");
      cat.ranges[key] = IntRange{pair[0].get<int>(), pair[1].get<int>()};
    }
  if (j.contains("complaints"))
    cat.complaints = j.at("complaints").get<std::vector<std::string>>();
  if (j.contains("names_by_gender"))
    for (auto& [key, values] : j.at("names_by_gender").items())
      cat.names_by_gender[key] = values.get<std::vector<std::string>>();
  cat.validate();
  log_info("catalog loaded: " + std::to_string(cat.complaints.size()) +
           " complaints, " + std::to_string(cat.attributes.size()) +
           " attribute lists");
  return cat;
}

// Per-split doctor/patient counts plus the sampling seed.
struct SplitPlan {
  struct Counts {
    int doctors = 0;
    int patients = 0;
  };
  std::map<std::string, Counts> splits;  // keyed by split name
  std::uint64_t seed = 0;

  void validate() const {
    for (const auto& [name, c] : splits) {
      if (c.doctors < 0 || c.patients < 0)
        throw ValidationError("negative persona count for split " + name);
    }
  }

  static SplitPlan paper_plan(std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    plan.splits["train"] = {60, 120};
    plan.splits["dev"] = {20, 20};
    plan.splits["test"] = {20, 60};
    return plan;
  }
};

struct PersonaSets {
  // split -> role -> personas, in generation order
  std::map<std::string, std::vector<Persona>> doctors;
  std::map<std::string, std::vector<Persona>> patients;

  std::vector<const Persona*> all() const {
    std::vector<const Persona*> out;
    for (const auto& [s, v] : doctors)
      for (const auto& p : v) out.push_back(&p);
    for (const auto& [s, v] : patients)
      for (const auto& p : v) out.push_back(&p);
    return out;
  }
};

namespace detail {

inline Persona sample_one(const AttributeCatalog& cat, Role role,
                          const std::string& split, int index,
                          std::uint64_t plan_seed) {
  Persona p;
  p.role = role;
  p.split = split;
  p.id = (role == Role::doctor ? "doc-" : "pat-") + split + "-" +
         [&] {
           char buf[8];
           std::snprintf(buf, sizeof(buf), "%04d", index);
           return std::string(buf);
         }();
  Rng rng(derive_seed(plan_seed, {split, to_string(role),
                                  std::to_string(index)}));
  // fixed sampling order; changing it changes corpora
  p.gender = cat.sample_value("gender", rng);
  auto by_gender = cat.names_by_gender.find(p.gender);
  if (by_gender != cat.names_by_gender.end() && !by_gender->second.empty()) {
    p.name = by_gender->second[rng.below(by_gender->second.size())];
  } else {
    p.name = cat.sample_value("name", rng);
  }
  p.age = cat.sample_range("age", rng);
  p.height_cm = cat.sample_range("height_cm", rng);
  p.weight_kg = cat.sample_range("weight_kg", rng);
  p.race = cat.sample_value("race", rng);
  p.forgetfulness = cat.sample_value("forgetfulness", rng);
  p.formality = cat.sample_value("formality", rng);
  p.hurriedness = cat.sample_value("hurriedness", rng);
  p.marital_status = cat.sample_value("marital_status", rng);
  if (role == Role::patient) {
    p.english_fluency = cat.sample_value("english_fluency", rng);
    p.occupation = cat.sample_value("occupation", rng);
    p.insurance = cat.sample_value("insurance", rng);
    p.reason_for_visit = cat.complaints[rng.below(cat.complaints.size())];
  } else {
    p.years_experience = cat.sample_range("years_experience", rng);
  }
  return p;
}

}  // namespace detail

inline PersonaSets sample_personas(const AttributeCatalog& cat,
                                   const SplitPlan& plan) {
  cat.validate();
  plan.validate();
  PersonaSets sets;
  for (const auto& [split, counts] : plan.splits) {
    auto& docs = sets.doctors[split];
    for (int i = 0; i < counts.doctors; ++i)
      docs.push_back(detail::sample_one(cat, Role::doctor, split, i, plan.seed));
    auto& pats = sets.patients[split];
    for (int i = 0; i < counts.patients; ++i)
      pats.push_back(detail::sample_one(cat, Role::patient, split, i, plan.seed));
  }
  return sets;
}

// One doctor-patient pairing to be generated.
struct DialogueSpec {
  std::string id;
  std::string doctor_id;
  std::string patient_id;
  std::string split;
  std::uint64_t seed = 0;

  bool operator==(const DialogueSpec&) const = default;

  json to_json() const {
    return json{{"id", id},
                {"doctor_id", doctor_id},
                {"patient_id", patient_id},
                {"split", split},
                {"seed", seed}};
  }

  static DialogueSpec from_json(const json& j) {
    DialogueSpec s;
    s.id = j.at("id").get<std::string>();
    s.doctor_id = j.at("doctor_id").get<std::string>();
    s.patient_id = j.at("patient_id").get<std::string>();
    s.split = j.at("split").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  }
};

// Full cross product of the split's doctors and patients; per-spec seeds are
// derived from (top seed, doctor id, patient id) so any dialogue regenerates
// in isolation.
inline std::vector<DialogueSpec> cross_product_specs(
    const std::vector<Persona>& doctors, const std::vector<Persona>& patients,
    const std::string& split, std::uint64_t seed) {
  for (const auto& p : doctors) {
    if (p.split != split)
      throw ValidationError("doctor " + p.id + " belongs to split '" +
                            p.split + "', not '" + split + "'");
    if (p.role != Role::doctor)
      throw ValidationError(p.id + " is not a doctor");
  }
  for (const auto& p : patients) {
    if (p.split != split)
      throw ValidationError("patient " + p.id + " belongs to split '" +
                            p.split + "', not '" + split + "'");
    if (p.role != Role::patient)
      throw ValidationError(p.id + " is not a patient");
  }
  std::vector<DialogueSpec> specs;
  specs.reserve(doctors.size() * patients.size());
  for (std::size_t d = 0; d < doctors.size(); ++d) {
    for (std::size_t p = 0; p < patients.size(); ++p) {
      DialogueSpec s;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "dlg-%s-%04zu-%04zu", split.c_str(), d,
                    p);
      s.id = buf;
      s.doctor_id = doctors[d].id;
      s.patient_id = patients[p].id;
      s.split = split;
      s.seed = derive_seed(seed, {doctors[d].id, patients[p].id});
      specs.push_back(std::move(s));
    }
  }
  return specs;
}

inline void check_split_disjoint(const PersonaSets& sets) {
  std::map<std::string, std::string> owner;  // id -> split
  for (const Persona* p : sets.all()) {
    auto [it, inserted] = owner.emplace(p->id, p->split);
    if (!inserted && it->second != p->split)
      throw ValidationError("persona id " + p->id +
                            " appears in splits " + it->second + " and " +
                            p->split);
    if (!inserted && it->second == p->split)
      throw ValidationError("duplicate persona id " + p->id);
  }
}

}  // namespace convoforge::persona
