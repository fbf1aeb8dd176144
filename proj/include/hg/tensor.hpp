#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage. Graph nodes hold
/// handles to their inputs and outputs, so a value stays alive for as long as
/// any tape entry refers to it. Use clone() for an independent copy.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0));
    Tensor(Shape shape, std::vector<T> values);

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t i) const;
    std::size_t numel() const;

    std::span<T> data();
    std::span<const T> data() const;
    T item() const;

    bool requires_grad() const;
    Tensor& set_requires_grad(bool on = true);
    bool is_leaf() const;
    void mark_non_leaf();

    bool has_grad() const;
    std::span<T> grad();
    std::span<const T> grad() const;
    /// Allocates a zero gradient buffer when none exists.
    std::span<T> ensure_grad();
    void zero_grad();
    void drop_grad();

    /// Independent copy of the values; gradient state is not copied.
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

private:
    struct Impl {
        Shape shape;
        std::vector<T> data;
        std::vector<T> grad;
        bool requires_grad = false;
        bool leaf = true;
    };
    std::shared_ptr<Impl> impl_;

    Impl& impl();
    const Impl& impl() const;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

/// Element-wise conversion between precisions; gradient state is dropped.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
    std::vector<To> values(src.numel());
    auto in = src.data();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<To>(in[i]);
    return Tensor<To>(src.shape(), std::move(values));
}

}  // namespace hg
