#include "adcare/data/split.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "adcare/error.h"

namespace adcare::data {

DatasetSplit split(std::span<const AnnotationRecord> records, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie strictly between 0 and 1");
  std::vector<AnnotationRecord> sorted(records.begin(), records.end());
  std::ranges::sort(sorted, {}, &AnnotationRecord::video_id);

  std::map<std::string, std::size_t> per_patient;
  for (const auto& r : sorted) ++per_patient[r.patient_id];
  if (per_patient.size() < 2) {
    throw ConfigError("cannot split by patient: corpus has " + std::to_string(per_patient.size()) + " patient(s)");
  }
  std::vector<std::string> patients;
  for (const auto& [p, _] : per_patient) patients.push_back(p);
  std::mt19937_64 rng(seed);
  std::shuffle(patients.begin(), patients.end(), rng);

  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(sorted.size())));
  std::set<std::string> train_patients;
  std::size_t taken = 0;
  for (const auto& p : patients) {
    if (taken + per_patient[p] <= target) {
      train_patients.insert(p);
      taken += per_patient[p];
    }
  }
  // Never leave either side empty.
  if (train_patients.empty()) train_patients.insert(patients.front());
  if (train_patients.size() == patients.size()) train_patients.erase(patients.back());

  DatasetSplit out;
  out.ratio = ratio;
  for (auto& r : sorted) (train_patients.contains(r.patient_id) ? out.train : out.validation).push_back(std::move(r));
  return out;
}

}  // namespace adcare::data
