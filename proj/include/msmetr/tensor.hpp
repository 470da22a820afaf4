#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace msmetr {

/// Dense multi-way array with a flat, first-mode-fastest data layout.
///
/// The flat index of entry (i_1, ..., i_M) is i_1 + p_1*(i_2 + p_2*(i_3 + ...)),
/// so an order-2 tensor is bit-compatible with a column-major Eigen matrix.
/// That one vectorisation convention is used everywhere, including file I/O.
template <typename Scalar>
class TensorT {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Index = Eigen::Index;

    TensorT() = default;

    explicit TensorT(std::vector<Index> shape)
        : shape_(std::move(shape)), data_(Vec::Zero(checked_size(shape_))) {}

    TensorT(std::vector<Index> shape, Vec data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_))
            throw std::invalid_argument("tensor data length does not match shape");
    }

    static TensorT constant(std::vector<Index> shape, Scalar value) {
        TensorT t(std::move(shape));
        t.data_.setConstant(value);
        return t;
    }

    static TensorT ones(std::vector<Index> shape) { return constant(std::move(shape), Scalar(1)); }

    /// Order-2 convenience: wrap a matrix (column-major layout matches ours).
    static TensorT from_matrix(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
        TensorT t({m.rows(), m.cols()});
        t.data_ = Eigen::Map<const Vec>(m.data(), m.size());
        return t;
    }

    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> to_matrix() const {
        if (order() != 2) throw std::invalid_argument("to_matrix requires an order-2 tensor");
        return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>(
            data_.data(), shape_[0], shape_[1]);
    }

    const std::vector<Index>& shape() const { return shape_; }
    Index order() const { return static_cast<Index>(shape_.size()); }
    Index size() const { return data_.size(); }
    Index dim(Index m) const { return shape_.at(static_cast<std::size_t>(m)); }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    Scalar& operator[](Index flat) { return data_[flat]; }
    Scalar operator[](Index flat) const { return data_[flat]; }

    Scalar& at(std::initializer_list<Index> idx) { return data_[flat_index(idx)]; }
    Scalar at(std::initializer_list<Index> idx) const { return data_[flat_index(idx)]; }

    Index flat_index(std::initializer_list<Index> idx) const {
        if (static_cast<Index>(idx.size()) != order())
            throw std::invalid_argument("index order mismatch");
        Index flat = 0, stride = 1, m = 0;
        for (Index i : idx) {
            if (i < 0 || i >= shape_[static_cast<std::size_t>(m)])
                throw std::out_of_range("tensor index out of range");
            flat += i * stride;
            stride *= shape_[static_cast<std::size_t>(m)];
            ++m;
        }
        return flat;
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

private:
    static Index checked_size(const std::vector<Index>& shape) {
        if (shape.empty()) throw std::invalid_argument("tensor order must be >= 1");
        Index n = 1;
        for (Index p : shape) {
            if (p < 1) throw std::invalid_argument("tensor mode sizes must be >= 1");
            n *= p;
        }
        return n;
    }

    std::vector<Index> shape_;
    Vec data_;
};

using Tensor = TensorT<double>;

/// Soft-PARAFAC factor collection: D components, each holding M full-shape
/// factor tensors whose Hadamard product contributes one component.
template <typename Scalar>
class FactorSetT {
public:
    using Index = Eigen::Index;

    FactorSetT() = default;

    FactorSetT(Index rank, Index modes, std::vector<Index> shape)
        : rank_(rank), modes_(modes), shape_(std::move(shape)) {
        validate_dims();
        factors_.assign(static_cast<std::size_t>(rank_ * modes_), TensorT<Scalar>(shape_));
    }

    FactorSetT(Index rank, Index modes, std::vector<TensorT<Scalar>> factors)
        : rank_(rank), modes_(modes), factors_(std::move(factors)) {
        validate_dims();
        if (factors_.size() != static_cast<std::size_t>(rank_ * modes_))
            throw std::invalid_argument("factor count must equal rank * modes");
        shape_ = factors_.front().shape();
        for (const auto& f : factors_)
            if (f.shape() != shape_) throw std::invalid_argument("all factors must share one shape");
    }

    Index rank() const { return rank_; }
    Index modes() const { return modes_; }
    const std::vector<Index>& shape() const { return shape_; }

    TensorT<Scalar>& factor(Index d, Index m) { return factors_[flat(d, m)]; }
    const TensorT<Scalar>& factor(Index d, Index m) const { return factors_[flat(d, m)]; }

private:
    void validate_dims() const {
        if (rank_ < 1) throw std::invalid_argument("factor set rank must be >= 1");
        if (modes_ < 2) throw std::invalid_argument("factor set needs at least two modes");
    }

    std::size_t flat(Index d, Index m) const {
        if (d < 0 || d >= rank_ || m < 0 || m >= modes_)
            throw std::out_of_range("factor index out of range");
        return static_cast<std::size_t>(d * modes_ + m);
    }

    Index rank_ = 0;
    Index modes_ = 0;
    std::vector<Index> shape_;
    std::vector<TensorT<Scalar>> factors_;
};

using FactorSet = FactorSetT<double>;

/// PARAFAC marginals: gamma(d, m) is the length-p_m loading vector of
/// component d along mode m.
template <typename Scalar>
class MarginalsT {
public:
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Index = Eigen::Index;

    MarginalsT() = default;

    MarginalsT(Index rank, const std::vector<Index>& shape) : rank_(rank), modes_(static_cast<Index>(shape.size())) {
        gammas_.reserve(static_cast<std::size_t>(rank_ * modes_));
        for (Index d = 0; d < rank_; ++d)
            for (Index m = 0; m < modes_; ++m)
                gammas_.push_back(Vec::Zero(shape[static_cast<std::size_t>(m)]));
    }

    Index rank() const { return rank_; }
    Index modes() const { return modes_; }

    Vec& gamma(Index d, Index m) { return gammas_[static_cast<std::size_t>(d * modes_ + m)]; }
    const Vec& gamma(Index d, Index m) const { return gammas_[static_cast<std::size_t>(d * modes_ + m)]; }

private:
    Index rank_ = 0;
    Index modes_ = 0;
    std::vector<Vec> gammas_;
};

using Marginals = MarginalsT<double>;

/// Precomputed flat-index gather table for mode-m slices of a fixed shape:
/// offsets(r, j) is the flat position of the r-th canonical element of the
/// j-th slice along the mode. Slice extraction becomes a plain gather.
class ModeIndexer {
public:
    using Index = Eigen::Index;

    ModeIndexer(const std::vector<Index>& shape, Index mode) {
        const Index order = static_cast<Index>(shape.size());
        if (mode < 0 || mode >= order) throw std::out_of_range("mode index out of range");
        p_m_ = shape[static_cast<std::size_t>(mode)];
        Index stride = 1;
        for (Index m = 0; m < mode; ++m) stride *= shape[static_cast<std::size_t>(m)];
        slice_len_ = 1;
        for (Index m = 0; m < order; ++m)
            if (m != mode) slice_len_ *= shape[static_cast<std::size_t>(m)];
        offsets_.resize(slice_len_, p_m_);
        // Walk flat indices of slice j = 0 in canonical order; other slices
        // are shifted by j * stride.
        Index r = 0;
        std::vector<Index> idx(static_cast<std::size_t>(order), 0);
        for (Index flat = 0, n = slice_len_ * p_m_; flat < n; ++flat) {
            if (idx[static_cast<std::size_t>(mode)] == 0) {
                for (Index j = 0; j < p_m_; ++j) offsets_(r, j) = flat + j * stride;
                ++r;
            }
            for (Index m = 0; m < order; ++m) {
                if (++idx[static_cast<std::size_t>(m)] < shape[static_cast<std::size_t>(m)]) break;
                idx[static_cast<std::size_t>(m)] = 0;
            }
        }
    }

    Index slice_len() const { return slice_len_; }
    Index num_slices() const { return p_m_; }
    Index offset(Index r, Index j) const { return offsets_(r, j); }

    template <typename Scalar>
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gather(const TensorT<Scalar>& t, Index j) const {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(slice_len_);
        for (Index r = 0; r < slice_len_; ++r) out[r] = t[offsets_(r, j)];
        return out;
    }

    template <typename Scalar>
    void scatter(TensorT<Scalar>& t, Index j, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) const {
        for (Index r = 0; r < slice_len_; ++r) t[offsets_(r, j)] = v[r];
    }

private:
    Index p_m_ = 0;
    Index slice_len_ = 0;
    Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> offsets_;
};

/// <a, b>: sum over all entries of the elementwise product.
template <typename Scalar>
Scalar inner_product(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("inner_product: shape mismatch");
    return a.data().dot(b.data());
}

/// Elementwise (Hadamard) product of two same-shaped tensors.
template <typename Scalar>
TensorT<Scalar> hadamard(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("hadamard: shape mismatch");
    return TensorT<Scalar>(a.shape(), a.data().cwiseProduct(b.data()));
}

/// Hadamard product of component d's factors over all modes except `skip_mode`
/// (pass a negative skip_mode to include every mode).
template <typename Scalar>
TensorT<Scalar> hadamard_component(const FactorSetT<Scalar>& f, Eigen::Index d, Eigen::Index skip_mode = -1) {
    TensorT<Scalar> out = TensorT<Scalar>::ones(f.shape());
    for (Eigen::Index m = 0; m < f.modes(); ++m) {
        if (m == skip_mode) continue;
        out.data().array() *= f.factor(d, m).data().array();
    }
    return out;
}

/// sum_d B_1^(d) o ... o B_M^(d): the composed coefficient tensor.
template <typename Scalar>
TensorT<Scalar> hadamard_compose(const FactorSetT<Scalar>& f) {
    TensorT<Scalar> out(f.shape());
    for (Eigen::Index d = 0; d < f.rank(); ++d)
        out.data() += hadamard_component(f, d).data();
    return out;
}

/// vec of the j-th slice of t along mode m, in canonical (first remaining
/// mode fastest) order. Length is q_m = prod_{l != m} p_l.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mode_slice_vec(const TensorT<Scalar>& t, Eigen::Index m,
                                                        Eigen::Index j) {
    if (m < 0 || m >= t.order()) throw std::out_of_range("mode index out of range");
    if (j < 0 || j >= t.dim(m)) throw std::out_of_range("slice index out of range");
    return ModeIndexer(t.shape(), m).gather(t, j);
}

/// Inverse of mode_slice_vec: write vector v back into slice (m, j).
template <typename Scalar>
void set_mode_slice_vec(TensorT<Scalar>& t, Eigen::Index m, Eigen::Index j,
                        const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& v) {
    if (m < 0 || m >= t.order()) throw std::out_of_range("mode index out of range");
    if (j < 0 || j >= t.dim(m)) throw std::out_of_range("slice index out of range");
    ModeIndexer indexer(t.shape(), m);
    if (v.size() != indexer.slice_len()) throw std::invalid_argument("slice length mismatch");
    indexer.scatter(t, j, v);
}

template <typename Scalar>
struct BackfitTerms {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> psi;  ///< auxiliary covariate vector for slice (d,m,j)
    Scalar r_slice;                                ///< residual over the other slices of mode m
    Scalar r_comp;                                 ///< residual over the other components d' != d
};

/// Back-fitting decomposition of <compose(f), X> around factor slice (d,m,j):
///
///   <compose(f), X> = beta' psi + r_slice + r_comp,
///   beta = mode_slice_vec(f.factor(d,m), m, j).
///
/// psi is the j-th mode-m slice of (prod of the other modes' factors) o X;
/// r_slice sums component d over the remaining slices of mode m; r_comp sums
/// the full inner products of the other components. Each term is computed
/// directly from its definition, so the identity above is a genuine check.
template <typename Scalar>
BackfitTerms<Scalar> backfit_terms(const FactorSetT<Scalar>& f, const TensorT<Scalar>& X,
                                   Eigen::Index d, Eigen::Index m, Eigen::Index j) {
    if (f.shape() != X.shape()) throw std::invalid_argument("backfit_terms: covariate shape mismatch");
    if (d < 0 || d >= f.rank()) throw std::out_of_range("component index out of range");
    const TensorT<Scalar>& fm = f.factor(d, m);
    if (m < 0 || m >= f.modes()) throw std::out_of_range("mode index out of range");
    if (j < 0 || j >= fm.dim(m)) throw std::out_of_range("slice index out of range");

    BackfitTerms<Scalar> out;
    ModeIndexer indexer(X.shape(), m);

    TensorT<Scalar> others_x = hadamard(hadamard_component(f, d, m), X);
    out.psi = indexer.gather(others_x, j);

    // r_slice: <(full component d) o X> restricted to slices j' != j.
    TensorT<Scalar> full = hadamard(others_x, fm);
    out.r_slice = Scalar(0);
    for (Eigen::Index jp = 0; jp < indexer.num_slices(); ++jp) {
        if (jp == j) continue;
        for (Eigen::Index r = 0; r < indexer.slice_len(); ++r)
            out.r_slice += full[indexer.offset(r, jp)];
    }

    out.r_comp = Scalar(0);
    for (Eigen::Index dp = 0; dp < f.rank(); ++dp) {
        if (dp == d) continue;
        out.r_comp += inner_product(hadamard_component(f, dp), X);
    }
    return out;
}

}  // namespace msmetr
