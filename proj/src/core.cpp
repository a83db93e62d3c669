// Copyright (c) mnverify contributors.
// SPDX-License-Identifier: Apache-2.0
#include "mnv/core.hpp"

#include <algorithm>
#include <cmath>

namespace mnv {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    _rows = rows.size();
    _cols = _rows == 0 ? 0 : rows.begin()->size();
    _data.reserve(_rows * _cols);
    for (const auto& r : rows) {
        if (r.size() != _cols)
            throw DimensionError("ragged matrix literal");
        _data.insert(_data.end(), r.begin(), r.end());
    }
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows, std::size_t cols_if_empty)
{
    Matrix m;
    m._rows = rows.size();
    m._cols = rows.empty() ? cols_if_empty : rows.front().size();
    m._data.reserve(m._rows * m._cols);
    for (const auto& r : rows) {
        if (r.size() != m._cols)
            throw DimensionError("ragged matrix: expected " + std::to_string(m._cols) + " columns, got "
                                 + std::to_string(r.size()));
        m._data.insert(m._data.end(), r.begin(), r.end());
    }
    return m;
}

Matrix Matrix::identity(std::size_t n)
{
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

Vector Matrix::row_vector(std::size_t r) const
{
    auto s = row(r);
    return { s.begin(), s.end() };
}

std::vector<Vector> Matrix::to_rows() const
{
    std::vector<Vector> out;
    out.reserve(_rows);
    for (std::size_t r = 0; r < _rows; ++r)
        out.push_back(row_vector(r));
    return out;
}

Vector Matrix::apply(std::span<const double> x) const
{
    if (x.size() != _cols)
        throw DimensionError("matrix-vector product: " + std::to_string(_cols) + " columns vs vector of size "
                             + std::to_string(x.size()));
    Vector y(_rows, 0.0);
    for (std::size_t r = 0; r < _rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < _cols; ++c)
            acc += _data[r * _cols + c] * x[c];
        y[r] = acc;
    }
    return y;
}

Box::Box(Vector lo, Vector hi) : lower{ std::move(lo) }, upper{ std::move(hi) }
{
    if (lower.size() != upper.size())
        throw DimensionError("box bounds of different dimension");
    for (std::size_t j = 0; j < lower.size(); ++j) {
        if (std::isnan(lower[j]) || std::isnan(upper[j]))
            throw DimensionError("box bound is NaN");
        if (lower[j] > upper[j])
            throw DimensionError("box lower bound exceeds upper bound at coordinate " + std::to_string(j));
    }
}

Box Box::uniform(std::size_t dim, double lo, double hi)
{
    return Box{ Vector(dim, lo), Vector(dim, hi) };
}

bool Box::contains(std::span<const double> p, double slack) const
{
    if (p.size() != dim())
        return false;
    for (std::size_t j = 0; j < p.size(); ++j)
        if (p[j] < lower[j] - slack || p[j] > upper[j] + slack)
            return false;
    return true;
}

bool Box::contains(const Box& other, double slack) const
{
    if (other.dim() != dim())
        return false;
    for (std::size_t j = 0; j < dim(); ++j)
        if (other.lower[j] < lower[j] - slack || other.upper[j] > upper[j] + slack)
            return false;
    return true;
}

bool Box::intersects(const Box& other, double slack) const
{
    for (std::size_t j = 0; j < dim(); ++j)
        if (other.upper[j] < lower[j] - slack || other.lower[j] > upper[j] + slack)
            return false;
    return true;
}

std::optional<Box> Box::intersection(const Box& other) const
{
    if (!intersects(other))
        return std::nullopt;
    Box out = *this;
    for (std::size_t j = 0; j < dim(); ++j) {
        out.lower[j] = std::max(lower[j], other.lower[j]);
        out.upper[j] = std::min(upper[j], other.upper[j]);
    }
    return out;
}

Box Box::hull(const Box& other) const
{
    if (other.dim() != dim())
        throw DimensionError("hull of boxes of different dimension");
    Box out = *this;
    for (std::size_t j = 0; j < dim(); ++j) {
        out.lower[j] = std::min(lower[j], other.lower[j]);
        out.upper[j] = std::max(upper[j], other.upper[j]);
    }
    return out;
}

Box Box::slice(std::size_t offset, std::size_t count) const
{
    if (offset + count > dim())
        throw DimensionError("box slice out of range");
    return Box{ Vector(lower.begin() + offset, lower.begin() + offset + count),
                Vector(upper.begin() + offset, upper.begin() + offset + count) };
}

double Box::volume() const
{
    double v = 1.0;
    for (std::size_t j = 0; j < dim(); ++j)
        v *= upper[j] - lower[j];
    return v;
}

Box concat(const Box& a, const Box& b)
{
    Box out = a;
    out.lower.insert(out.lower.end(), b.lower.begin(), b.lower.end());
    out.upper.insert(out.upper.end(), b.upper.begin(), b.upper.end());
    return out;
}

Vector concat(std::span<const double> a, std::span<const double> b)
{
    Vector out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

Interval linear_range(std::span<const double> c, const Box& box, double constant)
{
    if (c.size() != box.dim())
        throw DimensionError("linear_range: coefficient/box dimension mismatch");
    Interval r{ constant, constant };
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (c[j] == 0.0)
            continue;
        const double a = c[j] * box.lower[j];
        const double b = c[j] * box.upper[j];
        r.lo += std::min(a, b);
        r.hi += std::max(a, b);
    }
    return r;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw DimensionError("dot product of vectors of different size");
    double acc = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j)
        acc += a[j] * b[j];
    return acc;
}

} // namespace mnv
