#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "advdet/rng.hpp"

namespace advdet {

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense rank-N float32 tensor, row-major. Value-semantic handle over shared
// storage; gradient storage is allocated lazily by the tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<float> data, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);
    static Tensor uniform(Shape shape, float lo, float hi, Rng& rng, bool requires_grad = false);
    static Tensor normal(Shape shape, float mean, float stddev, Rng& rng, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    int64_t numel() const;
    bool is_scalar() const { return numel() == 1; }

    std::span<float> data();
    std::span<const float> data() const;
    float item() const;
    float at(int64_t i) const { return data()[i]; }

    bool requires_grad() const;
    void set_requires_grad(bool v);

    // Gradient buffer, zero-filled on first access.
    std::span<float> grad();
    std::span<const float> grad() const;
    bool has_grad() const;
    void zero_grad();

    // Deep copy of values (gradient not copied).
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
    const void* storage_id() const { return impl_.get(); }

private:
    struct Impl {
        Shape shape;
        std::vector<float> values;
        std::vector<float> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;

    explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
};

} // namespace advdet
