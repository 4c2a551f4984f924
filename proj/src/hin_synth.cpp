#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "aghint/hin.hpp"

namespace aghint::hin {

void validate(const SynthSpec& s) {
  if (s.classes < 1) throw UsageError("synth: classes must be >= 1");
  if (!(s.rho >= 0.0 && s.rho <= 1.0)) throw UsageError(fmt::format("synth: rho {} outside [0, 1]", s.rho));
  if (s.num_target < 1) throw UsageError("synth: num_target must be >= 1");
  if (s.num_aux_types < 1) throw UsageError("synth: num_aux_types must be >= 1");
  if (s.target_dim < 1) throw UsageError("synth: target_dim must be >= 1");
  const auto a = static_cast<std::size_t>(s.num_aux_types);
  if (s.aux_dims.size() != a || s.aux_nodes.size() != a || s.densities.size() != a) {
    throw UsageError(fmt::format("synth: aux_dims, aux_nodes and densities need {} entries each", a));
  }
  for (std::size_t i = 0; i < a; ++i) {
    if (s.aux_dims[i] < 0) throw UsageError("synth: aux_dims must be >= 0");
    if (s.aux_nodes[i] < s.classes) throw UsageError("synth: every aux type needs at least one node per class");
    if (!(s.densities[i] > 0.0)) throw UsageError("synth: densities must be > 0");
  }
  if (!(s.prototype_density > 0.0 && s.prototype_density <= 1.0)) {
    throw UsageError("synth: prototype_density must be in (0, 1]");
  }
  if (!(s.bridge_fraction >= 0.0 && s.bridge_fraction <= 1.0)) {
    throw UsageError("synth: bridge_fraction must be in [0, 1]");
  }
}

HeteroGraph synth_hin(const SynthSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(derive_seed(spec.seed, Stream::synth));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n_aux = spec.num_aux_types;
  const int classes = spec.classes;

  GraphParts p;
  p.node_types.push_back({"target", AttributeKind::discrete, spec.target_dim, true});
  for (int a = 0; a < n_aux; ++a) {
    const int dim = spec.aux_dims[a];
    // Missing attributes get a one-hot type indicator, which needs dim > type index.
    p.node_types.push_back({fmt::format("aux{}", a), AttributeKind::continuous,
                            dim > 0 ? dim : n_aux + 1, dim > 0});
  }
  for (int a = 0; a < n_aux; ++a) {
    p.edge_types.push_back({fmt::format("target-aux{}", a), 0, a + 1, 2 * a + 1});
    p.edge_types.push_back({fmt::format("aux{}-target", a), a + 1, 0, 2 * a});
  }
  p.target_type = 0;

  std::vector<NodeId> aux_base(n_aux);
  for (int t = 0; t < spec.num_target; ++t) {
    p.node_type_of.push_back(0);
    p.local_id_of.push_back(t);
  }
  for (int a = 0; a < n_aux; ++a) {
    aux_base[a] = static_cast<NodeId>(p.node_type_of.size());
    for (int i = 0; i < spec.aux_nodes[a]; ++i) {
      p.node_type_of.push_back(a + 1);
      p.local_id_of.push_back(i);
    }
  }

  // Class prototypes; every prototype has at least one active bit.
  const auto dim = static_cast<std::size_t>(spec.target_dim);
  std::vector<std::uint8_t> proto(static_cast<std::size_t>(classes) * dim, 0);
  for (int c = 0; c < classes; ++c) {
    bool any = false;
    for (std::size_t d = 0; d < dim; ++d) {
      proto[c * dim + d] = unit(rng) < spec.prototype_density;
      any = any || proto[c * dim + d];
    }
    if (!any) proto[c * dim + std::uniform_int_distribution<std::size_t>(0, dim - 1)(rng)] = 1;
  }

  auto& labels = p.labels;
  labels.num_classes = classes;
  labels.class_of.resize(spec.num_target);
  labels.labeled.assign(spec.num_target, 1);
  std::uniform_int_distribution<int> pick_class(0, classes - 1);
  for (auto& c : labels.class_of) c = pick_class(rng);

  AttributeMatrix target_attr{static_cast<std::size_t>(spec.num_target), dim, {}};
  target_attr.values.resize(target_attr.rows * dim);
  for (int t = 0; t < spec.num_target; ++t) {
    const int c = labels.class_of[t];
    for (std::size_t d = 0; d < dim; ++d) {
      const bool keep = unit(rng) < spec.rho;
      const bool noise_bit = unit(rng) < spec.prototype_density;
      target_attr.values[t * dim + d] = (keep ? proto[c * dim + d] : noise_bit) ? 1.0 : 0.0;
    }
  }
  p.attributes.resize(n_aux + 1);
  p.attributes[0] = std::move(target_attr);

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int a = 0; a < n_aux; ++a) {
    if (spec.aux_dims[a] == 0) continue;
    AttributeMatrix m{static_cast<std::size_t>(spec.aux_nodes[a]), static_cast<std::size_t>(spec.aux_dims[a]), {}};
    m.values.resize(m.rows * m.cols);
    for (auto& x : m.values) x = gauss(rng);
    p.attributes[a + 1] = std::move(m);
  }

  // Aux node i of a type belongs to the community of class i % classes. A
  // link lands in the target's own community unless it is a bridge. Each
  // target has its own bridge rate, uniform around bridge_fraction, so
  // neighbourhood disparity spreads over the whole range.
  const double spread = std::min(spec.bridge_fraction, 1.0 - spec.bridge_fraction);
  for (int t = 0; t < spec.num_target; ++t) {
    const int c = labels.class_of[t];
    const double bridge_rate = spec.bridge_fraction + (2.0 * unit(rng) - 1.0) * spread;
    for (int a = 0; a < n_aux; ++a) {
      const double dens = spec.densities[a];
      const int links = static_cast<int>(std::floor(dens)) + (unit(rng) < dens - std::floor(dens) ? 1 : 0);
      const int per_class = spec.aux_nodes[a] / classes + 1;
      std::vector<NodeId> chosen;
      for (int l = 0; l < links; ++l) {
        int community = c;
        if (classes > 1 && unit(rng) < bridge_rate) {
          community = (c + 1 + std::uniform_int_distribution<int>(0, classes - 2)(rng)) % classes;
        }
        NodeId aux = -1;
        for (int attempt = 0; attempt < 8; ++attempt) {
          int i = -1;
          while (i < 0 || i >= spec.aux_nodes[a]) {
            i = community + classes * std::uniform_int_distribution<int>(0, per_class - 1)(rng);
          }
          aux = aux_base[a] + i;
          if (std::find(chosen.begin(), chosen.end(), aux) == chosen.end()) break;
        }
        if (std::find(chosen.begin(), chosen.end(), aux) != chosen.end()) continue;
        chosen.push_back(aux);
        p.edges.push_back({t, aux, 2 * a});
      }
    }
  }

  return HeteroGraph::build(std::move(p));
}

}  // namespace aghint::hin
