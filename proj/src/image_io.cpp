#include "varireal/image_io.hpp"

#include "varireal/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cstring>

namespace varireal {

namespace fs = std::filesystem;

namespace {

void write_atomically(const cv::Mat& mat, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp.png";
  if (!cv::imwrite(tmp.string(), mat)) throw Error(Errc::io_error, "cannot write " + path.string());
  fs::rename(tmp, path);
}

}  // namespace

Image load_image(const fs::path& path, bool gray) {
  cv::Mat mat = cv::imread(path.string(), gray ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
  if (mat.empty()) throw Error(Errc::io_error, "cannot read image " + path.string());
  if (!gray) cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  Image out(mat.cols, mat.rows, gray ? 1 : 3);
  const std::size_t row = static_cast<std::size_t>(mat.cols) * out.channels;
  for (int y = 0; y < mat.rows; ++y) std::memcpy(&out.data[y * row], mat.ptr(y), row);
  return out;
}

void save_image(const Image& image, const fs::path& path) {
  cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) std::memcpy(mat.ptr(y), &image.data[y * row], row);
  if (image.channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  write_atomically(mat, path);
}

void save_binary(const BinaryRaster& raster, const fs::path& path) {
  cv::Mat mat(raster.height, raster.width, CV_8UC1);
  for (int y = 0; y < raster.height; ++y)
    for (int x = 0; x < raster.width; ++x) mat.at<std::uint8_t>(y, x) = raster.at(x, y) ? 255 : 0;
  write_atomically(mat, path);
}

std::string encode_png(const Image& image) {
  cv::Mat mat(image.height, image.width, image.channels == 1 ? CV_8UC1 : CV_8UC3);
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) std::memcpy(mat.ptr(y), &image.data[y * row], row);
  if (image.channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", mat, buf)) throw Error(Errc::io_error, "png encoding failed");
  return std::string(buf.begin(), buf.end());
}

Mask load_mask(const fs::path& path) {
  const Image gray = load_image(path, true);
  Mask out(gray.width, gray.height);
  for (std::size_t i = 0; i < gray.data.size(); ++i) out.bits[i] = gray.data[i] >= 128 ? 1 : 0;
  return out;
}

}  // namespace varireal
