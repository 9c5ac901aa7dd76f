#include "gestura/aggregation.hpp"

#include <algorithm>
#include <string>

#include "gestura/errors.hpp"

namespace gestura {

ModelParameters aggregate(std::span<const ClientUpdate> updates) {
    if (updates.empty()) throw ParameterError("aggregate needs at least one client update");

    std::vector<const ClientUpdate*> order;
    order.reserve(updates.size());
    for (const auto& u : updates) order.push_back(&u);
    std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });

    const std::size_t length = order.front()->parameters.size();
    double total = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& u = *order[k];
        if (k > 0 && u.client_id == order[k - 1]->client_id) {
            throw ParameterError("duplicate client id " + std::to_string(u.client_id));
        }
        if (u.sample_count == 0) throw ParameterError("client " + std::to_string(u.client_id) + " has no samples");
        if (u.parameters.size() != length) {
            throw ShapeError("client " + std::to_string(u.client_id) + " sent " + std::to_string(u.parameters.size()) +
                             " parameters, expected " + std::to_string(length));
        }
        total += static_cast<double>(u.sample_count);
    }

    std::vector<double> weights(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) weights[k] = static_cast<double>(order[k]->sample_count) / total;

    ModelParameters result = order.front()->parameters;
    const auto& ref = order.front()->parameters.values;
    for (std::size_t i = 0; i < length; ++i) {
        double delta = 0.0;
        for (std::size_t k = 1; k < order.size(); ++k) {
            delta += weights[k] * (order[k]->parameters.values[i] - ref[i]);
        }
        if (delta != 0.0) result.values[i] = ref[i] + delta;
    }
    return result;
}

}  // namespace gestura
