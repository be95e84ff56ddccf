#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace chns {

/// Uniform rectangular grid. Scalars live at cell centers, velocity
/// components on the faces normal to their axis (MAC staggering).
/// In 2D the third axis is degenerate: n[2] == 1, length[2] == h[2] == 1.
struct Grid {
    int dim = 2;
    std::array<int, 3> n{1, 1, 1};
    std::array<double, 3> length{1.0, 1.0, 1.0};
    std::array<double, 3> h{1.0, 1.0, 1.0};

    std::size_t cells() const { return std::size_t(n[0]) * n[1] * n[2]; }
    double cell_volume() const;
    double volume() const;

    /// Row-major cell index, x fastest: (z, y, x) order.
    std::size_t index(int i, int j, int k = 0) const {
        return (std::size_t(k) * n[1] + j) * n[0] + i;
    }

    /// Shape of the face array carrying the velocity component along `axis`.
    std::array<int, 3> face_shape(int axis) const {
        auto s = n;
        s[axis] += 1;
        return s;
    }
    std::size_t face_count(int axis) const;

    bool operator==(const Grid& other) const = default;
};

/// Builds a validated grid. `dims` and `lengths` must both have 2 or 3 entries.
Grid make_grid(std::span<const int> dims, std::span<const double> lengths);
Grid make_grid(int nx, int ny, double lx, double ly);
Grid make_grid(int nx, int ny, int nz, double lx, double ly, double lz);

enum class ScalarBC { NeumannZero };
enum class VectorBC { NoSlip };

/// Cell-centered scalar field with homogeneous Neumann closure.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const Grid& grid, double value = 0.0)
        : grid_(grid), values_(grid.cells(), value) {}
    ScalarField(const Grid& grid, std::vector<double> values);

    const Grid& grid() const { return grid_; }
    ScalarBC bc() const { return ScalarBC::NeumannZero; }
    std::size_t size() const { return values_.size(); }

    double& operator[](std::size_t c) { return values_[c]; }
    double operator[](std::size_t c) const { return values_[c]; }
    double& operator()(int i, int j, int k = 0) { return values_[grid_.index(i, j, k)]; }
    double operator()(int i, int j, int k = 0) const { return values_[grid_.index(i, j, k)]; }

    std::span<double> data() { return values_; }
    std::span<const double> data() const { return values_; }
    const std::vector<double>& values() const { return values_; }

    ScalarField& operator+=(const ScalarField& o);
    ScalarField& operator-=(const ScalarField& o);
    ScalarField& operator*=(double s);
    ScalarField& operator+=(double c);

    bool all_finite() const;
    double max_abs() const;

    bool operator==(const ScalarField& o) const = default;

private:
    Grid grid_;
    std::vector<double> values_;
};

ScalarField operator+(ScalarField a, const ScalarField& b);
ScalarField operator-(ScalarField a, const ScalarField& b);
ScalarField operator*(double s, ScalarField a);

/// Face-centered velocity field with no-slip walls. All components are
/// stored back to back in one buffer so solvers can treat the field as a
/// flat vector; boundary-normal faces are held at exactly zero.
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const Grid& grid);

    const Grid& grid() const { return grid_; }
    VectorBC bc() const { return VectorBC::NoSlip; }

    std::span<double> component(int axis);
    std::span<const double> component(int axis) const;

    /// Face value; (i, j, k) indexes the face array of `axis`.
    double operator()(int axis, int i, int j, int k = 0) const {
        return data_[offset_[axis] + face_index(axis, i, j, k)];
    }
    /// Writes an interior face. Writes to boundary-normal faces are ignored.
    void set(int axis, int i, int j, int k, double value);

    std::size_t face_index(int axis, int i, int j, int k = 0) const {
        const auto s = grid_.face_shape(axis);
        return (std::size_t(k) * s[1] + j) * s[0] + i;
    }
    bool is_boundary_face(int axis, int i, int j, int k = 0) const {
        const int idx = axis == 0 ? i : axis == 1 ? j : k;
        return idx == 0 || idx == grid_.n[axis];
    }

    /// Flat view over all components; callers writing through it must keep
    /// boundary faces at zero (enforce_no_slip restores the invariant).
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }
    std::size_t size() const { return data_.size(); }

    void enforce_no_slip();
    bool satisfies_no_slip() const;

    VectorField& operator+=(const VectorField& o);
    VectorField& operator-=(const VectorField& o);
    VectorField& operator*=(double s);

    bool all_finite() const;
    double max_abs() const;

    bool operator==(const VectorField& o) const = default;

private:
    Grid grid_;
    std::vector<double> data_;
    std::array<std::size_t, 4> offset_{0, 0, 0, 0};
};

VectorField operator+(VectorField a, const VectorField& b);
VectorField operator-(VectorField a, const VectorField& b);
VectorField operator*(double s, VectorField a);

/// Neumaier-compensated accumulator used by every global reduction.
class CompensatedSum {
public:
    void add(double x);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Midpoint-rule integral: cell volume times the (compensated) sum of values.
double integrate(const ScalarField& f);
double mean(const ScalarField& f);

/// L2 inner products weighted by cell volume (faces carry the volume of a cell).
double dot(const ScalarField& a, const ScalarField& b);
double dot(const VectorField& a, const VectorField& b);
double norm_l2(const ScalarField& f);
double norm_l2(const VectorField& u);

/// f - mean(f).
ScalarField zero_mean_part(const ScalarField& f);

} // namespace chns
