#include "hg/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace hg {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one dimension");
    for (auto d : shape)
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_string(shape));
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    impl_->data.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
    check_shape(shape);
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("tensor shape " + shape_string(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
}

template <typename T>
typename Tensor<T>::Impl& Tensor<T>::impl() {
    if (!impl_) throw std::logic_error("access to an undefined tensor");
    return *impl_;
}

template <typename T>
const typename Tensor<T>::Impl& Tensor<T>::impl() const {
    if (!impl_) throw std::logic_error("access to an undefined tensor");
    return *impl_;
}

template <typename T>
const Shape& Tensor<T>::shape() const { return impl().shape; }

template <typename T>
std::size_t Tensor<T>::dim(std::size_t i) const {
    const auto& s = shape();
    if (i >= s.size()) throw std::out_of_range("dimension index out of range");
    return s[i];
}

template <typename T>
std::size_t Tensor<T>::numel() const { return impl().data.size(); }

template <typename T>
std::span<T> Tensor<T>::data() { return impl().data; }

template <typename T>
std::span<const T> Tensor<T>::data() const { return impl().data; }

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw std::logic_error("item() requires a single-element tensor, shape " + shape_string(shape()));
    return impl().data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const { return impl_ && impl_->requires_grad; }

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
    impl().requires_grad = on;
    return *this;
}

template <typename T>
bool Tensor<T>::is_leaf() const { return impl().leaf; }

template <typename T>
void Tensor<T>::mark_non_leaf() { impl().leaf = false; }

template <typename T>
bool Tensor<T>::has_grad() const { return impl_ && !impl_->grad.empty(); }

template <typename T>
std::span<T> Tensor<T>::grad() { return impl().grad; }

template <typename T>
std::span<const T> Tensor<T>::grad() const { return impl().grad; }

template <typename T>
std::span<T> Tensor<T>::ensure_grad() {
    auto& im = impl();
    if (im.grad.empty()) im.grad.assign(im.data.size(), T(0));
    return im.grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
    auto& g = impl().grad;
    std::fill(g.begin(), g.end(), T(0));
}

template <typename T>
void Tensor<T>::drop_grad() {
    auto& g = impl().grad;
    g.clear();
    g.shrink_to_fit();
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
    return Tensor<T>(shape(), std::vector<T>(impl().data));
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace hg
