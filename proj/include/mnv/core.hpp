// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mnv {

using Vector = std::vector<double>;

/// Dense row-major matrix. Small and owned by value; the systems handled here
/// are desk-scale.
class Matrix
{
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : _rows{ rows }, _cols{ cols }, _data(rows * cols, fill)
    {
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix from_rows(const std::vector<Vector>& rows, std::size_t cols_if_empty = 0);
    static Matrix identity(std::size_t n);

    [[nodiscard]] std::size_t rows() const { return _rows; }
    [[nodiscard]] std::size_t cols() const { return _cols; }
    [[nodiscard]] bool empty() const { return _rows == 0 || _cols == 0; }

    double& operator()(std::size_t r, std::size_t c) { return _data[r * _cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return _data[r * _cols + c]; }

    [[nodiscard]] std::span<const double> row(std::size_t r) const
    {
        return { _data.data() + r * _cols, _cols };
    }
    [[nodiscard]] Vector row_vector(std::size_t r) const;
    [[nodiscard]] std::vector<Vector> to_rows() const;

    /// y = M * x
    [[nodiscard]] Vector apply(std::span<const double> x) const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t _rows = 0;
    std::size_t _cols = 0;
    std::vector<double> _data;
};

struct Interval
{
    double lo = 0.0;
    double hi = 0.0;

    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] bool contains(double v, double slack = 0.0) const
    {
        return v >= lo - slack && v <= hi + slack;
    }
    bool operator==(const Interval&) const = default;
};

/// Axis-aligned hyper-box. Invariant: lower[j] <= upper[j] and both vectors
/// have the same length. Constructors validate; mutation through the public
/// vectors is the caller's responsibility.
struct Box
{
    Vector lower;
    Vector upper;

    Box() = default;
    Box(Vector lo, Vector hi);
    static Box point(const Vector& p) { return Box{ p, p }; }
    static Box uniform(std::size_t dim, double lo, double hi);

    [[nodiscard]] std::size_t dim() const { return lower.size(); }
    [[nodiscard]] Interval interval(std::size_t j) const { return { lower[j], upper[j] }; }
    [[nodiscard]] bool contains(std::span<const double> p, double slack = 0.0) const;
    [[nodiscard]] bool contains(const Box& other, double slack = 0.0) const;
    [[nodiscard]] bool intersects(const Box& other, double slack = 0.0) const;
    [[nodiscard]] std::optional<Box> intersection(const Box& other) const;
    [[nodiscard]] Box hull(const Box& other) const;
    [[nodiscard]] Box slice(std::size_t offset, std::size_t count) const;
    [[nodiscard]] double volume() const;

    bool operator==(const Box&) const = default;
};

/// (a, b) -> a x b as one box of dimension a.dim() + b.dim().
Box concat(const Box& a, const Box& b);
Vector concat(std::span<const double> a, std::span<const double> b);

/// Interval of c.x + constant over a box (exact for a single linear functional).
Interval linear_range(std::span<const double> c, const Box& box, double constant = 0.0);

double dot(std::span<const double> a, std::span<const double> b);

/// Raised for malformed dimensions, bad parameters and similar caller errors.
class DimensionError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace mnv
