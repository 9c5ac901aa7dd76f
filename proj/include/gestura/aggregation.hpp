#pragma once

#include <span>
#include <vector>

#include "gestura/params.hpp"

namespace gestura {

// What a client sends back after local training: weights and a sample count, nothing else.
struct ClientUpdate {
    std::size_t client_id = 0;
    ModelParameters parameters;
    std::size_t sample_count = 0;
    std::vector<double> losses;  // per-batch training loss
};

// Federated averaging: sum_k (n_k / n) theta_k, accumulated in ascending client-id order.
// Evaluated as theta_ref + sum_k w_k (theta_k - theta_ref) with theta_ref the lowest-id
// update, so identical inputs and single-client rounds reproduce the input bit for bit.
ModelParameters aggregate(std::span<const ClientUpdate> updates);

}  // namespace gestura
