#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "summ/rng.hpp"

namespace summ {

// Dense row-major 2-D tensor of doubles. Vectors are stored as 1xN rows and
// scalars as 1x1; that is all the model math needs.
class Tensor {
public:
    Tensor() = default;
    Tensor(int rows, int cols)
        : rows_(rows), cols_(cols), data_(std::size_t(rows) * std::size_t(cols), 0.0) {}

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double v);
    static Tensor scalar_of(double v);
    static Tensor row(std::initializer_list<double> values);
    static Tensor of(int rows, int cols, std::initializer_list<double> values);
    static Tensor uniform(int rows, int cols, double lo, double hi, Rng& rng);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int r, int c) { return data_[std::size_t(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[std::size_t(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    // Requires a 1x1 tensor.
    double scalar() const;

    bool all_finite() const;
    void fill(double v);

    // "[3x4]", for error messages.
    std::string shape_str() const;

    bool operator==(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

}  // namespace summ
