#include "chns/grid.hpp"

#include "chns/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace chns {

double Grid::cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= h[a];
    return v;
}

double Grid::volume() const {
    double v = 1.0;
    for (int a = 0; a < dim; ++a) v *= length[a];
    return v;
}

std::size_t Grid::face_count(int axis) const {
    const auto s = face_shape(axis);
    return std::size_t(s[0]) * s[1] * s[2];
}

Grid make_grid(std::span<const int> dims, std::span<const double> lengths) {
    if (dims.size() != lengths.size() || dims.size() < 2 || dims.size() > 3) {
        throw InvalidArgument("grid needs 2 or 3 matching dims and lengths");
    }
    Grid g;
    g.dim = int(dims.size());
    for (int a = 0; a < g.dim; ++a) {
        if (dims[a] < 4) {
            throw InvalidArgument("grid too small: axis " + std::to_string(a) + " has " +
                                  std::to_string(dims[a]) + " cells, need at least 4");
        }
        if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a])) {
            throw InvalidArgument("grid length along axis " + std::to_string(a) +
                                  " must be positive");
        }
        g.n[a] = dims[a];
        g.length[a] = lengths[a];
        g.h[a] = lengths[a] / dims[a];
    }
    return g;
}

Grid make_grid(int nx, int ny, double lx, double ly) {
    const std::array<int, 2> d{nx, ny};
    const std::array<double, 2> l{lx, ly};
    return make_grid(d, l);
}

Grid make_grid(int nx, int ny, int nz, double lx, double ly, double lz) {
    const std::array<int, 3> d{nx, ny, nz};
    const std::array<double, 3> l{lx, ly, lz};
    return make_grid(d, l);
}

// ---------------------------------------------------------------------------
// ScalarField

ScalarField::ScalarField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.cells()) {
        throw InvalidArgument("scalar field has " + std::to_string(values_.size()) +
                              " values, grid has " + std::to_string(grid_.cells()) + " cells");
    }
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
    for (std::size_t c = 0; c < values_.size(); ++c) values_[c] += o.values_[c];
    return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
    for (std::size_t c = 0; c < values_.size(); ++c) values_[c] -= o.values_[c];
    return *this;
}

ScalarField& ScalarField::operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
}

ScalarField& ScalarField::operator+=(double c) {
    for (auto& v : values_) v += c;
    return *this;
}

bool ScalarField::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

// ---------------------------------------------------------------------------
// VectorField

VectorField::VectorField(const Grid& grid) : grid_(grid) {
    std::size_t off = 0;
    for (int a = 0; a < 3; ++a) {
        offset_[a] = off;
        if (a < grid.dim) off += grid.face_count(a);
    }
    offset_[3] = off;
    data_.assign(off, 0.0);
}

std::span<double> VectorField::component(int axis) {
    return std::span<double>(data_).subspan(offset_[axis], offset_[axis + 1] - offset_[axis]);
}

std::span<const double> VectorField::component(int axis) const {
    return std::span<const double>(data_).subspan(offset_[axis], offset_[axis + 1] - offset_[axis]);
}

void VectorField::set(int axis, int i, int j, int k, double value) {
    if (is_boundary_face(axis, i, j, k)) return;
    data_[offset_[axis] + face_index(axis, i, j, k)] = value;
}

void VectorField::enforce_no_slip() {
    for (int a = 0; a < grid_.dim; ++a) {
        const auto s = grid_.face_shape(a);
        auto comp = component(a);
        for (int k = 0; k < s[2]; ++k)
            for (int j = 0; j < s[1]; ++j)
                for (int i = 0; i < s[0]; ++i)
                    if (is_boundary_face(a, i, j, k)) comp[face_index(a, i, j, k)] = 0.0;
    }
}

bool VectorField::satisfies_no_slip() const {
    for (int a = 0; a < grid_.dim; ++a) {
        const auto s = grid_.face_shape(a);
        const auto comp = component(a);
        for (int k = 0; k < s[2]; ++k)
            for (int j = 0; j < s[1]; ++j)
                for (int i = 0; i < s[0]; ++i)
                    if (is_boundary_face(a, i, j, k) && comp[face_index(a, i, j, k)] != 0.0)
                        return false;
    }
    return true;
}

VectorField& VectorField::operator+=(const VectorField& o) {
    for (std::size_t c = 0; c < data_.size(); ++c) data_[c] += o.data_[c];
    return *this;
}

VectorField& VectorField::operator-=(const VectorField& o) {
    for (std::size_t c = 0; c < data_.size(); ++c) data_[c] -= o.data_[c];
    return *this;
}

VectorField& VectorField::operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
}

bool VectorField::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double VectorField::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }

// ---------------------------------------------------------------------------
// Reductions

void CompensatedSum::add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        comp_ += (sum_ - t) + x;
    } else {
        comp_ += (x - t) + sum_;
    }
    sum_ = t;
}

double integrate(const ScalarField& f) {
    CompensatedSum s;
    for (double v : f.data()) s.add(v);
    return s.value() * f.grid().cell_volume();
}

double mean(const ScalarField& f) { return integrate(f) / f.grid().volume(); }

double dot(const ScalarField& a, const ScalarField& b) {
    CompensatedSum s;
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t c = 0; c < x.size(); ++c) s.add(x[c] * y[c]);
    return s.value() * a.grid().cell_volume();
}

double dot(const VectorField& a, const VectorField& b) {
    CompensatedSum s;
    const auto x = a.flat();
    const auto y = b.flat();
    for (std::size_t c = 0; c < x.size(); ++c) s.add(x[c] * y[c]);
    return s.value() * a.grid().cell_volume();
}

double norm_l2(const ScalarField& f) { return std::sqrt(dot(f, f)); }
double norm_l2(const VectorField& u) { return std::sqrt(dot(u, u)); }

ScalarField zero_mean_part(const ScalarField& f) {
    ScalarField out = f;
    out += -mean(f);
    return out;
}

} // namespace chns
