#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace dff {

/// Lens and sensor intrinsics plus the focus sweep. All lengths in mm.
///
/// Construction validates the invariants: positive intrinsics, a non-empty
/// strictly monotonic focus schedule, and every focus distance beyond the
/// focal length.
class CameraConfig {
 public:
  CameraConfig(double focal_length_mm, double sensor_width_mm, double f_number,
               double work_distance_mm, int image_width_px, int image_height_px,
               std::vector<double> focus_schedule_mm);

  double focal_length_mm() const { return focal_length_mm_; }
  double sensor_width_mm() const { return sensor_width_mm_; }
  double f_number() const { return f_number_; }
  double work_distance_mm() const { return work_distance_mm_; }
  int image_width_px() const { return image_width_px_; }
  int image_height_px() const { return image_height_px_; }
  const std::vector<double>& focus_schedule_mm() const { return focus_schedule_mm_; }
  std::size_t slice_count() const { return focus_schedule_mm_.size(); }

  double aperture_diameter_mm() const { return focal_length_mm_ / f_number_; }
  double pixel_pitch_mm() const { return sensor_width_mm_ / image_width_px_; }

  /// Same intrinsics with a different image size (pixel pitch follows).
  CameraConfig with_image_size(int width_px, int height_px) const;

 private:
  double focal_length_mm_;
  double sensor_width_mm_;
  double f_number_;
  double work_distance_mm_;
  int image_width_px_;
  int image_height_px_;
  std::vector<double> focus_schedule_mm_;
};

struct LensState {
  double sensor_distance_mm = 0.0;
  double fov_mm = 0.0;
  double relative_fov = 1.0;
};

/// Thin-lens image distance F*f/(F-f) for an object at `focus_distance_mm`.
double image_distance(double focal_length_mm, double focus_distance_mm);

double sensor_distance(const CameraConfig& config, std::size_t slice_index);

/// Per-slice sensor distance, absolute FoV (W*A/s) and FoV relative to the
/// narrowest slice.
std::vector<LensState> lens_states(const CameraConfig& config);

/// Index of the slice with the smallest FoV (largest sensor distance).
std::size_t target_index(const CameraConfig& config);

/// Blur-circle diameter in pixels of a point at `object_distance_mm` when the
/// lens is focused for slice `slice_index`.
double coc_diameter_px(const CameraConfig& config, std::size_t slice_index,
                       double object_distance_mm);

/// Same, for an arbitrary focus distance.
double coc_diameter_px_at(const CameraConfig& config, double focus_distance_mm,
                          double object_distance_mm);

CameraConfig parse_camera_config(const std::string& text);
std::string format_camera_config(const CameraConfig& config);
CameraConfig load_camera_config(const std::filesystem::path& path);
void save_camera_config(const CameraConfig& config, const std::filesystem::path& path);

}  // namespace dff
