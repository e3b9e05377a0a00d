#include "fte/trajectory.hpp"

#include "fte/error.hpp"
#include "fte/text_io.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <map>

namespace fte {
namespace {

constexpr std::array<std::string_view, 10> kColumns = {"t",  "x",  "y",       "z",    "qw",
                                                      "qx", "qy", "qz", "gripper", "split"};

void check_invariants(const std::vector<Sample>& samples, const std::vector<std::size_t>& splits) {
  if (samples.size() < 2) {
    throw FormatError("trajectory needs at least 2 samples");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (!std::isfinite(s.time) || !is_finite(s.pose.position)) {
      throw FormatError("non-finite value at sample " + std::to_string(i));
    }
    if (!(s.gripper >= 0.0 && s.gripper <= 1.0)) {
      throw FormatError("gripper outside [0,1] at sample " + std::to_string(i));
    }
    if (i > 0 && !(s.time > samples[i - 1].time)) {
      throw FormatError("times not strictly increasing at sample " + std::to_string(i));
    }
  }
  if (splits.size() < 2 || splits.front() != 0 || splits.back() != samples.size() - 1) {
    throw FormatError("splits must start at the first sample and end at the last");
  }
  for (std::size_t k = 1; k < splits.size(); ++k) {
    if (splits[k] <= splits[k - 1]) {
      throw FormatError("splits not strictly increasing");
    }
  }
}

Trajectory from_rows(std::vector<Sample> samples, const std::vector<bool>& split_flags) {
  std::vector<std::size_t> splits;
  for (std::size_t i = 0; i < split_flags.size(); ++i) {
    if (split_flags[i]) {
      splits.push_back(i);
    }
  }
  return {std::move(samples), std::move(splits)};
}

bool parse_split_flag(double value, std::size_t row) {
  if (value != 0.0 && value != 1.0) {
    throw FormatError("split must be 0 or 1 at row " + std::to_string(row));
  }
  return value == 1.0;
}

}  // namespace

Trajectory::Trajectory(std::vector<Sample> samples, std::vector<std::size_t> splits)
    : samples_(std::move(samples)), splits_(std::move(splits)) {
  check_invariants(samples_, splits_);
}

Trajectory Trajectory::single_segment(std::vector<Sample> samples) {
  const std::size_t last = samples.empty() ? 0 : samples.size() - 1;
  return {std::move(samples), {0, last}};
}

Trajectory Trajectory::segment(std::size_t k) const {
  if (k >= segment_count()) {
    throw std::out_of_range("segment index out of range");
  }
  const auto first = samples_.begin() + static_cast<std::ptrdiff_t>(splits_[k]);
  const auto last = samples_.begin() + static_cast<std::ptrdiff_t>(splits_[k + 1]) + 1;
  return single_segment({first, last});
}

double Trajectory::duration() const {
  return samples_.empty() ? 0.0 : samples_.back().time - samples_.front().time;
}

std::vector<Vec3> Trajectory::positions() const {
  std::vector<Vec3> out;
  out.reserve(samples_.size());
  for (const Sample& s : samples_) {
    out.push_back(s.pose.position);
  }
  return out;
}

std::vector<UnitQuaternion> Trajectory::orientations() const {
  std::vector<UnitQuaternion> out;
  out.reserve(samples_.size());
  for (const Sample& s : samples_) {
    out.push_back(s.pose.orientation);
  }
  return out;
}

double Trajectory::arc_length() const {
  double length = 0.0;
  for (std::size_t i = 1; i < samples_.size(); ++i) {
    length += (samples_[i].pose.position - samples_[i - 1].pose.position).norm();
  }
  return length;
}

Trajectory parse_trajectory_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::string_view line : split_fields(text, '\n')) {
    if (!line.empty()) {
      lines.push_back(line);
    }
  }
  if (lines.empty()) {
    throw FormatError("trajectory CSV is empty");
  }
  const auto header = split_fields(lines.front());
  std::map<std::string_view, std::size_t> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column_of[header[i]] = i;
  }
  std::array<std::size_t, kColumns.size()> index{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = column_of.find(kColumns[c]);
    if (it == column_of.end()) {
      throw FormatError("trajectory CSV missing column '" + std::string(kColumns[c]) + "'");
    }
    index[c] = it->second;
  }

  std::vector<Sample> samples;
  std::vector<bool> split_flags;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = split_fields(lines[row]);
    if (fields.size() != header.size()) {
      throw FormatError("trajectory CSV row " + std::to_string(row) + " has wrong field count");
    }
    std::array<double, kColumns.size()> v{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      v[c] = parse_number(fields[index[c]], "trajectory CSV row " + std::to_string(row));
    }
    samples.push_back({v[0], {{v[1], v[2], v[3]}, UnitQuaternion(v[4], v[5], v[6], v[7])}, v[8]});
    split_flags.push_back(parse_split_flag(v[9], row));
  }
  return from_rows(std::move(samples), split_flags);
}

Trajectory parse_trajectory_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trajectory JSON: ") + e.what());
  }
  const nlohmann::json& rows = doc.is_object() ? doc.value("samples", nlohmann::json()) : doc;
  if (!rows.is_array()) {
    throw FormatError("trajectory JSON must be an array of samples or {\"samples\": [...]}");
  }
  std::vector<Sample> samples;
  std::vector<bool> split_flags;
  for (std::size_t row = 0; row < rows.size(); ++row) {
    std::array<double, kColumns.size()> v{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
      const auto it = rows[row].find(std::string(kColumns[c]));
      if (it == rows[row].end() || !it->is_number()) {
        throw FormatError("trajectory JSON sample " + std::to_string(row) + " missing numeric '" +
                          std::string(kColumns[c]) + "'");
      }
      v[c] = it->get<double>();
    }
    samples.push_back({v[0], {{v[1], v[2], v[3]}, UnitQuaternion(v[4], v[5], v[6], v[7])}, v[8]});
    split_flags.push_back(parse_split_flag(v[9], row));
  }
  return from_rows(std::move(samples), split_flags);
}

std::string trajectory_to_csv(const Trajectory& trajectory) {
  std::string out = "t,x,y,z,qw,qx,qy,qz,gripper,split\n";
  std::size_t next_split = 0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const Sample& s = trajectory[i];
    const bool is_split =
        next_split < trajectory.splits().size() && trajectory.splits()[next_split] == i;
    if (is_split) {
      ++next_split;
    }
    const UnitQuaternion& q = s.pose.orientation;
    for (const double value : {s.time, s.pose.position.x(), s.pose.position.y(),
                               s.pose.position.z(), q.w(), q.x(), q.y(), q.z(), s.gripper}) {
      out += format_number(value);
      out += ',';
    }
    out += is_split ? "1\n" : "0\n";
  }
  return out;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".json") {
    return parse_trajectory_json(text);
  }
  return parse_trajectory_csv(text);
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
  write_text_file(path, trajectory_to_csv(trajectory));
}

}  // namespace fte
