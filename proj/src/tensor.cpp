#include "crowdrank/tensor.hpp"

#include <stdexcept>

namespace crowdrank {

std::string Shape::to_string() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size())
        throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                    " does not match shape " + shape.to_string());
}

Tensor Tensor::vector(std::vector<double> values) {
    Shape s{1, 1, static_cast<int>(values.size())};
    return Tensor(s, std::move(values));
}

}  // namespace crowdrank
