#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace crowdrank {

struct Shape {
    int height = 1;
    int width = 1;
    int channels = 1;

    std::size_t size() const {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
               static_cast<std::size_t>(channels);
    }
    std::string to_string() const;
    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense H x W x C tensor, channel-fastest (HWC) layout.
/// A feature vector of length D is stored as 1 x 1 x D.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(s), data(s.size(), 0.0) {}
    Tensor(Shape s, std::vector<double> values);

    static Tensor vector(std::vector<double> values);

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape.width) +
                static_cast<std::size_t>(x)) * static_cast<std::size_t>(shape.channels) +
               static_cast<std::size_t>(c);
    }
    double& at(int y, int x, int c) { return data[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data[index(y, x, c)]; }
};

}  // namespace crowdrank
