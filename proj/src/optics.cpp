#include "dff/optics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dff/image.hpp"
#include "dff/textio.hpp"

namespace dff {

CameraConfig::CameraConfig(double focal_length_mm, double sensor_width_mm, double f_number,
                           double work_distance_mm, int image_width_px, int image_height_px,
                           std::vector<double> focus_schedule_mm)
    : focal_length_mm_(focal_length_mm),
      sensor_width_mm_(sensor_width_mm),
      f_number_(f_number),
      work_distance_mm_(work_distance_mm),
      image_width_px_(image_width_px),
      image_height_px_(image_height_px),
      focus_schedule_mm_(std::move(focus_schedule_mm)) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(focal_length_mm_)) throw DataError("focal_length_mm must be positive");
  if (!positive(sensor_width_mm_)) throw DataError("sensor_width_mm must be positive");
  if (!positive(f_number_)) throw DataError("f_number must be positive");
  if (!positive(work_distance_mm_)) throw DataError("work_distance_mm must be positive");
  if (image_width_px_ <= 0 || image_height_px_ <= 0) throw DataError("image size must be positive");
  if (focus_schedule_mm_.empty()) throw DataError("focus schedule is empty");
  for (double f : focus_schedule_mm_) {
    if (!std::isfinite(f) || f <= focal_length_mm_) {
      throw DataError("every focus distance must exceed the focal length");
    }
  }
  if (focus_schedule_mm_.size() > 1) {
    const bool increasing = focus_schedule_mm_[1] > focus_schedule_mm_[0];
    for (std::size_t i = 1; i < focus_schedule_mm_.size(); ++i) {
      const double d = focus_schedule_mm_[i] - focus_schedule_mm_[i - 1];
      if (d == 0.0 || (d > 0.0) != increasing) {
        throw DataError("focus schedule must be strictly monotonic");
      }
    }
  }
}

CameraConfig CameraConfig::with_image_size(int width_px, int height_px) const {
  return CameraConfig(focal_length_mm_, sensor_width_mm_, f_number_, work_distance_mm_, width_px,
                      height_px, focus_schedule_mm_);
}

double image_distance(double focal_length_mm, double focus_distance_mm) {
  if (!(focus_distance_mm > focal_length_mm)) {
    throw DataError("object at or inside the focal length");
  }
  return focus_distance_mm * focal_length_mm / (focus_distance_mm - focal_length_mm);
}

double sensor_distance(const CameraConfig& config, std::size_t slice_index) {
  if (slice_index >= config.slice_count()) throw DataError("slice index out of range");
  return image_distance(config.focal_length_mm(), config.focus_schedule_mm()[slice_index]);
}

std::size_t target_index(const CameraConfig& config) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < config.slice_count(); ++i) {
    if (sensor_distance(config, i) > sensor_distance(config, best)) best = i;
  }
  return best;
}

std::vector<LensState> lens_states(const CameraConfig& config) {
  const double s_min = sensor_distance(config, target_index(config));
  std::vector<LensState> states;
  states.reserve(config.slice_count());
  for (std::size_t i = 0; i < config.slice_count(); ++i) {
    LensState st;
    st.sensor_distance_mm = sensor_distance(config, i);
    st.fov_mm = config.work_distance_mm() * config.sensor_width_mm() / st.sensor_distance_mm;
    st.relative_fov = s_min / st.sensor_distance_mm;
    states.push_back(st);
  }
  return states;
}

double coc_diameter_px_at(const CameraConfig& config, double focus_distance_mm,
                          double object_distance_mm) {
  const double f = config.focal_length_mm();
  if (!(object_distance_mm > f)) throw DataError("object at or inside the focal length");
  if (object_distance_mm == focus_distance_mm) return 0.0;
  const double s_focus = image_distance(f, focus_distance_mm);
  const double s_object = image_distance(f, object_distance_mm);
  const double diameter_mm = config.aperture_diameter_mm() * std::abs(s_object - s_focus) / s_object;
  return diameter_mm / config.pixel_pitch_mm();
}

double coc_diameter_px(const CameraConfig& config, std::size_t slice_index,
                       double object_distance_mm) {
  if (slice_index >= config.slice_count()) throw DataError("slice index out of range");
  return coc_diameter_px_at(config, config.focus_schedule_mm()[slice_index], object_distance_mm);
}

CameraConfig parse_camera_config(const std::string& text) {
  const auto kv = parse_key_values(text);
  auto req = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(std::string("camera config missing key: ") + key);
    return it->second;
  };
  return CameraConfig(parse_real(req("focal_length_mm")), parse_real(req("sensor_width_mm")),
                      parse_real(req("f_number")), parse_real(req("work_distance_mm")),
                      parse_int(req("image_width_px")), parse_int(req("image_height_px")),
                      parse_real_list(req("focus_schedule_mm")));
}

std::string format_camera_config(const CameraConfig& config) {
  std::ostringstream os;
  os << "focal_length_mm = " << format_real(config.focal_length_mm()) << '\n'
     << "sensor_width_mm = " << format_real(config.sensor_width_mm()) << '\n'
     << "f_number = " << format_real(config.f_number()) << '\n'
     << "work_distance_mm = " << format_real(config.work_distance_mm()) << '\n'
     << "image_width_px = " << config.image_width_px() << '\n'
     << "image_height_px = " << config.image_height_px() << '\n'
     << "focus_schedule_mm = ";
  for (std::size_t i = 0; i < config.slice_count(); ++i) {
    if (i) os << ',';
    os << format_real(config.focus_schedule_mm()[i]);
  }
  os << '\n';
  return os.str();
}

CameraConfig load_camera_config(const std::filesystem::path& path) {
  return parse_camera_config(read_text_file(path));
}

void save_camera_config(const CameraConfig& config, const std::filesystem::path& path) {
  write_text_file(path, format_camera_config(config));
}

}  // namespace dff
