#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace fosst {

/// Dense row-major matrix indexed (time sample m, frequency bin k).
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return values_.empty(); }

    T& operator()(std::size_t m, std::size_t k) {
        assert(m < rows_ && k < cols_);
        return values_[m * cols_ + k];
    }
    const T& operator()(std::size_t m, std::size_t k) const {
        assert(m < rows_ && k < cols_);
        return values_[m * cols_ + k];
    }

    std::span<T> row(std::size_t m) { return {values_.data() + m * cols_, cols_}; }
    std::span<const T> row(std::size_t m) const { return {values_.data() + m * cols_, cols_}; }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }

    void fill(const T& value) { std::fill(values_.begin(), values_.end(), value); }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> values_;
};

/// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end > begin ? end - begin : 0; }
    bool empty() const noexcept { return end <= begin; }
    bool contains(std::size_t i) const noexcept { return i >= begin && i < end; }
};

}  // namespace fosst
