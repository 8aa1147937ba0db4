#include "summ/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "summ/error.hpp"

namespace summ {

Tensor Tensor::full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    t.fill(v);
    return t;
}

Tensor Tensor::scalar_of(double v) {
    Tensor t(1, 1);
    t(0, 0) = v;
    return t;
}

Tensor Tensor::row(std::initializer_list<double> values) {
    Tensor t(1, int(values.size()));
    int c = 0;
    for (double v : values) t(0, c++) = v;
    return t;
}

Tensor Tensor::of(int rows, int cols, std::initializer_list<double> values) {
    if (std::size_t(rows) * std::size_t(cols) != values.size())
        throw ShapeError("ShapeMismatch: initializer of " + std::to_string(values.size()) +
                         " values for [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
    Tensor t(rows, cols);
    std::size_t i = 0;
    for (double v : values) t.data()[i++] = v;
    return t;
}

Tensor Tensor::uniform(int rows, int cols, double lo, double hi, Rng& rng) {
    Tensor t(rows, cols);
    for (double& v : t.flat()) v = rng.uniform(lo, hi);
    return t;
}

double Tensor::scalar() const {
    if (rows_ != 1 || cols_ != 1)
        throw ShapeError("NotScalarLoss: expected [1x1], got " + shape_str());
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

std::string Tensor::shape_str() const {
    return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

}  // namespace summ
