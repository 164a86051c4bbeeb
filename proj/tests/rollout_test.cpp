/**
 * Tree rollout tests: schedule validation, leaf/level/cost arithmetic, tree
 * construction invariants (shared means, per-edge substreams, level
 * cardinalities, stored densities), sequential baselines, descendant queries,
 * and leaf diversity.
 */

#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "treeflow/rollout.hpp"

using namespace treeflow;
using rollout::BranchEntry;
using rollout::BranchSchedule;
using test_support::CountingField;
using test_support::PointMassField;

namespace {

BranchSchedule sched(int b0, std::vector<BranchEntry> entries) {
  BranchSchedule s;
  s.root_factor = b0;
  s.entries = std::move(entries);
  return s;
}

// Random valid schedule with bounded leaf count, for property checks.
BranchSchedule random_schedule(rng::Rng& r, int T, long max_leaves) {
  BranchSchedule s;
  s.root_factor = 1 + static_cast<int>(r.next_u64() % 3);
  int prev = T - 1;
  while (true) {
    const int gap = 1 + static_cast<int>(r.next_u64() % 3);
    const int target = prev - gap;
    if (target < 0) break;
    const int factor = 2 + static_cast<int>(r.next_u64() % 2);
    if (rollout::leaf_count(s) * factor > max_leaves) break;
    s.entries.push_back({target, factor});
    prev = target;
    if (r.next_u64() % 3 == 0) break;
  }
  return s;
}

}  // namespace

TEST_CASE("validate_schedule: accepts the documented shapes") {
  CHECK_NOTHROW(rollout::validate_schedule(sched(8, {{8, 3}, {6, 2}}), 10));
  CHECK_NOTHROW(rollout::validate_schedule(sched(8, {}), 10));  // pure batch
  CHECK_NOTHROW(rollout::validate_schedule(sched(1, {{0, 2}}), 2));
}

TEST_CASE("validate_schedule: rejects each invariant violation") {
  CHECK_THROWS_AS(rollout::validate_schedule(sched(8, {{4, 3}, {4, 2}}), 10), ConfigError);
  CHECK_THROWS_AS(rollout::validate_schedule(sched(8, {{9, 2}}), 10), ConfigError);   // = T-1
  CHECK_THROWS_AS(rollout::validate_schedule(sched(8, {{4, 1}}), 10), ConfigError);   // factor
  CHECK_THROWS_AS(rollout::validate_schedule(sched(8, {{2, 2}, {4, 2}}), 10), ConfigError);
  CHECK_THROWS_AS(rollout::validate_schedule(sched(8, {{-1, 2}}), 10), ConfigError);
  CHECK_THROWS_AS(rollout::validate_schedule(sched(0, {}), 10), ConfigError);
}

TEST_CASE("leaf_count: hand values") {
  CHECK(rollout::leaf_count(sched(8, {{8, 3}, {6, 2}})) == 48);
  CHECK(rollout::leaf_count(sched(1, {{5, 2}, {3, 3}})) == 6);
  CHECK(rollout::leaf_count(sched(4, {})) == 4);
}

TEST_CASE("level_sizes: children appear at the branch target step") {
  // B_0=2, {1:2}, T=3: branching when producing x_1 quadruples step 1.
  const auto n3 = rollout::level_sizes(sched(2, {{1, 2}}), 3);
  CHECK(n3 == std::vector<long>{4, 4, 2, 1});

  // B_0=1, {4:3, 2:2}, T=6.
  const auto n6 = rollout::level_sizes(sched(1, {{4, 3}, {2, 2}}), 6);
  CHECK(n6 == std::vector<long>{6, 6, 6, 3, 3, 1, 1});
}

TEST_CASE("velocity_eval_count: amortization arithmetic") {
  // Tree: 20 evals. Sequential baseline for the same 6 leaves: 6 * 6 = 36.
  const auto r = rollout::velocity_eval_count(sched(1, {{4, 3}, {2, 2}}), 6);
  CHECK(r.velocity_evals == 20);
  CHECK(r.transitions == 25);
  CHECK(r.leaves == 6);
  CHECK(r.velocity_evals < 6 * 6);

  // Single chain: T evals, T edges.
  const auto chain = rollout::velocity_eval_count(sched(1, {}), 9);
  CHECK(chain.velocity_evals == 9);
  CHECK(chain.transitions == 9);
  CHECK(chain.leaves == 1);

  // Pure batch shares the single root evaluation across B_0 children.
  const auto batch = rollout::velocity_eval_count(sched(6, {}), 6);
  CHECK(batch.velocity_evals == 1 + 6 * 5);
  CHECK(batch.transitions == 36);
  CHECK(batch.leaves == 6);
}

TEST_CASE("rollout_tree: structure matches the schedule and stores exact transitions") {
  flow::TimeGrid grid(6);
  flow::NoiseSchedule ns;
  PointMassField field{{1.0, -1.0}};
  rng::Rng master(7);
  const auto s = sched(2, {{3, 3}, {1, 2}});
  const auto tree = rollout::rollout_tree(field, 0, s, grid, ns, master.derive(0), 2);

  const auto expect = rollout::level_sizes(s, 6);
  REQUIRE(tree.levels.size() == 7);
  for (int j = 0; j <= 6; ++j)
    CHECK(static_cast<long>(tree.levels[static_cast<size_t>(j)].size()) ==
          expect[static_cast<size_t>(j)]);
  CHECK(static_cast<long>(tree.leaves.size()) == rollout::leaf_count(s));

  for (const auto& node : tree.nodes) {
    if (node.parent == -1) {
      CHECK(node.step == 6);
      CHECK(!node.incoming.has_value());
      continue;
    }
    const auto& parent = tree.nodes[static_cast<size_t>(node.parent)];
    CHECK(node.step == parent.step - 1);
    REQUIRE(node.incoming.has_value());
    const auto& tr = *node.incoming;
    CHECK(tr.x_from == parent.state);
    CHECK(tr.x_to == node.state);
    CHECK(tr.step == parent.step);
    // Stored density is exactly recomputable from stored mean and scale.
    CHECK(tr.logp_old == flow::transition_logprob(tr.x_to, tr.mean_old, tr.noise_scale));
  }
}

TEST_CASE("rollout_tree: siblings share the drift mean bitwise, differ in noise") {
  flow::TimeGrid grid(5);
  flow::NoiseSchedule ns;
  PointMassField field{{0.0, 0.0}};
  rng::Rng master(13);
  const auto tree =
      rollout::rollout_tree(field, 0, sched(3, {{2, 2}}), grid, ns, master.derive(4), 2);

  for (const auto& node : tree.nodes) {
    if (node.children.size() < 2) continue;
    const auto& first = *tree.nodes[static_cast<size_t>(node.children[0])].incoming;
    for (size_t k = 1; k < node.children.size(); ++k) {
      const auto& other = *tree.nodes[static_cast<size_t>(node.children[k])].incoming;
      CHECK(other.mean_old == first.mean_old);
      CHECK(other.noise_scale == first.noise_scale);
      CHECK(other.x_to != first.x_to);
    }
  }
}

TEST_CASE("rollout_tree: velocity evaluations are counted exactly") {
  flow::TimeGrid grid(6);
  flow::NoiseSchedule ns;
  PointMassField base{{0.5, 0.5}};
  rng::Rng master(17);
  for (uint64_t trial = 0; trial < 30; ++trial) {
    rng::Rng r = master.derive(trial);
    const auto s = random_schedule(r, 6, 24);
    CountingField<PointMassField> counted{&base, 0};
    const auto tree = rollout::rollout_tree(counted, 0, s, grid, ns, r.derive(1), 2);
    const auto report = rollout::velocity_eval_count(s, 6);
    CHECK(counted.count == report.velocity_evals);
    CHECK(tree.velocity_evals == report.velocity_evals);
    long edges = 0;
    for (const auto& n : tree.nodes) edges += n.incoming.has_value() ? 1 : 0;
    CHECK(edges == report.transitions);
    CHECK(static_cast<long>(tree.leaves.size()) == report.leaves);
  }
}

TEST_CASE("rollout_tree: deterministic in the tree stream") {
  flow::TimeGrid grid(4);
  flow::NoiseSchedule ns;
  PointMassField field{{2.0, 2.0}};
  rng::Rng master(23);
  const auto s = sched(2, {{1, 2}});
  const auto a = rollout::rollout_tree(field, 1, s, grid, ns, master.derive(5), 2);
  const auto b = rollout::rollout_tree(field, 1, s, grid, ns, master.derive(5), 2);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (size_t i = 0; i < a.nodes.size(); ++i) CHECK(a.nodes[i].state == b.nodes[i].state);
  const auto c = rollout::rollout_tree(field, 1, s, grid, ns, master.derive(6), 2);
  CHECK(a.nodes[0].state != c.nodes[0].state);
}

TEST_CASE("rollout_tree: degenerate single chain equals sample_sde on the same stream") {
  flow::TimeGrid grid(8);
  flow::NoiseSchedule ns;
  PointMassField field{{1.0, 1.0}};
  rng::Rng master(29);
  const auto stream = master.derive(3);
  const auto tree = rollout::rollout_tree(field, 0, sched(1, {}), grid, ns, stream, 2);
  auto [final_state, transitions] =
      flow::sample_sde(field, 0, tree.nodes[0].state, grid, ns, stream);
  REQUIRE(transitions.size() == 8);
  for (int id = 1; id <= 8; ++id) {
    const auto& tr = *tree.nodes[static_cast<size_t>(id)].incoming;
    CHECK(tr.x_to == transitions[static_cast<size_t>(id) - 1].x_to);
    CHECK(tr.logp_old == transitions[static_cast<size_t>(id) - 1].logp_old);
  }
  CHECK(tree.nodes[8].state == final_state);
}

TEST_CASE("rollout_sequential: independent chains, exact transition counts") {
  flow::TimeGrid grid(6);
  flow::NoiseSchedule ns;
  PointMassField base{{0.0, 0.0}};
  rng::Rng master(31);
  CountingField<PointMassField> counted{&base, 0};
  const auto chains = rollout::rollout_sequential(counted, 0, 3, grid, ns, master, 2);
  REQUIRE(chains.size() == 3);
  long total = 0;
  for (const auto& [leaf, trs] : chains) total += static_cast<long>(trs.size());
  CHECK(total == 18);
  CHECK(counted.count == 18);

  // Chain g is exactly sample_sde on the derived substream.
  const auto sub = master.derive(1);
  const auto x_T = flow::edge_stream(sub, 0, 6).gaussian_vec(2);
  auto [leaf, trs] = flow::sample_sde(base, 0, x_T, grid, ns, sub);
  CHECK(chains[1].first == leaf);
  CHECK(chains[1].second[3].x_to == trs[3].x_to);
  CHECK_THROWS_AS(rollout::rollout_sequential(base, 0, 0, grid, ns, master, 2), ConfigError);
}

TEST_CASE("descendants: partitions and hand counts") {
  flow::TimeGrid grid(3);
  flow::NoiseSchedule ns;
  PointMassField field{{0.0, 0.0}};
  rng::Rng master(37);
  const auto tree = rollout::rollout_tree(field, 0, sched(2, {{1, 2}}), grid, ns,
                                          master.derive(0), 2);
  REQUIRE(tree.leaves.size() == 4);

  // Leaves map to themselves; the root sees every leaf.
  for (int leaf : tree.leaves) CHECK(rollout::descendants(tree, leaf) == std::vector<int>{leaf});
  CHECK(rollout::descendants(tree, 0) == tree.leaves);

  // Each step-2 node covers exactly 2 leaves; together they partition.
  std::vector<int> all;
  for (int id : tree.levels[2]) {
    const auto d = rollout::descendants(tree, id);
    CHECK(d.size() == 2);
    all.insert(all.end(), d.begin(), d.end());
  }
  std::sort(all.begin(), all.end());
  CHECK(all == tree.leaves);

  // Contiguity: every node's descendant set is an ascending run of leaf ids.
  for (const auto& node : tree.nodes) {
    const auto d = rollout::descendants(tree, node.id);
    for (size_t i = 1; i < d.size(); ++i) {
      auto it_prev = std::find(tree.leaves.begin(), tree.leaves.end(), d[i - 1]);
      auto it_cur = std::find(tree.leaves.begin(), tree.leaves.end(), d[i]);
      CHECK(it_cur - it_prev == 1);
    }
  }
  CHECK_THROWS_AS(rollout::descendants(tree, 999), ConfigError);
}

TEST_CASE("leaf_diversity: hand values on synthetic leaves") {
  auto make_leaf_tree = [](const std::vector<std::vector<double>>& states) {
    rollout::TrajectoryTree t;
    for (size_t i = 0; i < states.size(); ++i) {
      rollout::TreeNode n;
      n.id = static_cast<int>(i);
      n.step = 0;
      n.state = states[i];
      t.nodes.push_back(n);
      t.leaves.push_back(n.id);
    }
    return t;
  };
  CHECK(rollout::leaf_diversity(make_leaf_tree({{0.0, 0.0}, {3.0, 4.0}})) ==
        doctest::Approx(5.0).epsilon(1e-12));
  CHECK(rollout::leaf_diversity(make_leaf_tree({{0.0}, {1.0}, {2.0}})) ==
        doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(rollout::leaf_diversity(make_leaf_tree({{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}})) == 0.0);
  CHECK_THROWS_AS(rollout::leaf_diversity(make_leaf_tree({{0.0}})), ConfigError);
}

TEST_CASE("leaf_diversity: zero-noise rollout collapses to identical leaves") {
  flow::TimeGrid grid(4);
  flow::NoiseSchedule silent;
  silent.noise_level = 0.0;
  PointMassField field{{1.0, 1.0}};
  rng::Rng master(43);
  const auto tree =
      rollout::rollout_tree(field, 0, sched(3, {{1, 2}}), grid, silent, master.derive(0), 2);
  CHECK(rollout::leaf_diversity(tree) == doctest::Approx(0.0).epsilon(1e-12));
}
