#include "dsfl/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace dsfl {

void write_png(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 3 && image.dim(0) != 1))
    throw ShapeError("write_png: expected [3,H,W] or [1,H,W], got " + shape_str(image.shape()));
  const int C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const auto& d = image.data();
  cv::Mat mat(H, W, C == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      auto quant = [&](int c) {
        double v = d[static_cast<size_t>((c * H + y) * W + x)];
        return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      };
      if (C == 3) {
        // tensor is RGB, OpenCV stores BGR
        mat.at<cv::Vec3b>(y, x) = cv::Vec3b(quant(2), quant(1), quant(0));
      } else {
        mat.at<uint8_t>(y, x) = quant(0);
      }
    }
  if (!cv::imwrite(path, mat)) throw IoError("cannot write PNG " + path);
}

Tensor read_png(const std::string& path, int target_size) {
  cv::Mat mat = cv::imread(path, cv::IMREAD_COLOR);
  if (mat.empty()) throw IoError("cannot read image " + path);
  if (target_size > 0 && (mat.rows != target_size || mat.cols != target_size)) {
    cv::Mat resized;
    cv::resize(mat, resized, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
    mat = resized;
  }
  const int H = mat.rows, W = mat.cols;
  std::vector<double> d(static_cast<size_t>(3) * H * W);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const cv::Vec3b px = mat.at<cv::Vec3b>(y, x);
      d[static_cast<size_t>((0 * H + y) * W + x)] = px[2] / 255.0;  // R
      d[static_cast<size_t>((1 * H + y) * W + x)] = px[1] / 255.0;  // G
      d[static_cast<size_t>((2 * H + y) * W + x)] = px[0] / 255.0;  // B
    }
  return Tensor::from_data({3, H, W}, std::move(d));
}

Tensor image_grid(const std::vector<Tensor>& images) {
  if (images.empty()) throw ValueError("image_grid: no images");
  const int C = images[0].dim(0), H = images[0].dim(1), W = images[0].dim(2);
  for (const Tensor& im : images)
    if (im.shape() != images[0].shape()) throw ShapeError("image_grid: images differ in shape");
  const int sep = 2;
  const int n = static_cast<int>(images.size());
  const int WG = n * W + (n - 1) * sep;
  std::vector<double> out(static_cast<size_t>(C) * H * WG, 1.0);
  for (int i = 0; i < n; ++i) {
    const auto& d = images[static_cast<size_t>(i)].data();
    const int x0 = i * (W + sep);
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          out[static_cast<size_t>((c * H + y) * WG + x0 + x)] = d[static_cast<size_t>((c * H + y) * W + x)];
  }
  return Tensor::from_data({C, H, WG}, std::move(out));
}

}  // namespace dsfl
