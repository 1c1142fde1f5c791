#include "advdet/tensor.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace advdet {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int e : shape) {
        if (e < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
        n *= e;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto impl = std::make_shared<Impl>();
    int64_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->values.assign(static_cast<size_t>(n), value);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->values = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, float lo, float hi, Rng& rng, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (float& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::normal(Shape shape, float mean, float stddev, Rng& rng, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (float& v : t.data()) v = rng.normal(mean, stddev);
    return t;
}

const Shape& Tensor::shape() const {
    if (!impl_) throw std::runtime_error("shape() on undefined tensor");
    return impl_->shape;
}

int64_t Tensor::numel() const {
    if (!impl_) return 0;
    return static_cast<int64_t>(impl_->values.size());
}

std::span<float> Tensor::data() {
    if (!impl_) throw std::runtime_error("data() on undefined tensor");
    return impl_->values;
}

std::span<const float> Tensor::data() const {
    if (!impl_) throw std::runtime_error("data() on undefined tensor");
    return impl_->values;
}

float Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item() requires a scalar, got shape " + shape_str(shape()));
    return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
    if (!impl_) throw std::runtime_error("set_requires_grad() on undefined tensor");
    impl_->requires_grad = v;
}

std::span<float> Tensor::grad() {
    if (!impl_) throw std::runtime_error("grad() on undefined tensor");
    if (impl_->grad.size() != impl_->values.size())
        impl_->grad.assign(impl_->values.size(), 0.0f);
    return impl_->grad;
}

std::span<const float> Tensor::grad() const {
    return const_cast<Tensor*>(this)->grad();
}

bool Tensor::has_grad() const {
    return impl_ && impl_->grad.size() == impl_->values.size();
}

void Tensor::zero_grad() {
    if (impl_ && !impl_->grad.empty())
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
    if (!impl_) return Tensor();
    return from_data(impl_->shape, impl_->values, impl_->requires_grad);
}

} // namespace advdet
