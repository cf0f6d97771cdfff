#pragma once

#include <span>
#include <string>
#include <vector>

namespace sivar::svg {

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
};

std::string histogram(std::span<const double> values, const Axes& axes, std::size_t bins = 40);
std::string scatter(std::span<const double> x, std::span<const double> y, const Axes& axes);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};
std::string line_plot(const std::vector<Series>& series, const Axes& axes);

/// Overlaid traces sharing one x axis.
std::string traces(std::span<const double> x, const std::vector<std::vector<double>>& ys, const Axes& axes);

}  // namespace sivar::svg
