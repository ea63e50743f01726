#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "lateralsim/adversary.hpp"
#include "lateralsim/error.hpp"

using namespace lateralsim;
using testutil::build_network;
using testutil::state_with;

namespace {

// Independent legality oracle: recomputes reach from the snapshot that
// preceded each move, straight from the user records.
bool credentials_reach(const std::vector<Credential>& creds, const Host& h,
                       const Network& net) {
  for (const Credential& c : creds) {
    const User& u = net.user(c.user);
    const bool subnet = std::find(u.accessible_subnets.begin(),
                                  u.accessible_subnets.end(),
                                  h.subnet) != u.accessible_subnets.end();
    if (subnet && c.effective_privilege >= h.required_privilege) return true;
  }
  return false;
}

void check_episode_by_oracle(const Episode& ep, const Network& net) {
  REQUIRE(!ep.steps.empty());
  CHECK(ep.steps[0].host == ep.start_host);
  std::set<HostId> seen;
  for (std::size_t i = 0; i < ep.steps.size(); ++i) {
    const StepSnapshot& s = ep.steps[i];
    CHECK(seen.insert(s.host).second);
    const Host& h = net.host(s.host);
    CHECK(s.subnet == h.subnet);
    CHECK(s.required_privilege == h.required_privilege);
    CHECK(s.host_type == h.type);
    CHECK(s.exploits == h.exploits);
    for (const Credential& c : s.credentials) {
      CHECK(c.effective_privilege >= net.user(c.user).privilege_level);
      CHECK(c.effective_privilege < net.privilege_levels());
    }
    if (i > 0) {
      CHECK(credentials_reach(ep.steps[i - 1].credentials, h, net));
      for (const Credential& prev : ep.steps[i - 1].credentials) {
        const auto it = std::find_if(
            s.credentials.begin(), s.credentials.end(),
            [&](const Credential& c) { return c.user == prev.user; });
        REQUIRE(it != s.credentials.end());
        CHECK(it->effective_privilege >= prev.effective_privilege);
      }
    }
  }
  CHECK(ep.steps.size() <= net.hosts.size());
  bool any_move = false;
  for (const Host& h : net.hosts) {
    if (seen.count(h.id) == 0 &&
        credentials_reach(ep.steps.back().credentials, h, net)) {
      any_move = true;
    }
  }
  switch (ep.outcome) {
    case Outcome::GoalReached:
      CHECK(ep.steps.back().host == ep.goal_host);
      break;
    case Outcome::Blocked:
      CHECK(!any_move);
      CHECK(seen.count(ep.goal_host) == 0);
      break;
    case Outcome::StepBudgetExhausted:
      CHECK(any_move);
      CHECK(ep.max_steps > 0);
      CHECK(ep.steps.size() == static_cast<std::size_t>(ep.max_steps) + 1);
      break;
  }
}

// Four hosts on two subnets.
Network two_subnet_network() {
  return build_network(
      2, 3,
      {{0, 0}, {0, 2}, {1, 0}, {1, 1, HostType::Server, false, true}},
      {{0, {0}, {0}}, {1, {0, 1}, {3}}, {2, {0, 1}, {1}}});
}

}  // namespace

TEST_CASE("can_access follows subnet access and effective privilege") {
  const Network net = two_subnet_network();
  CHECK(can_access(state_with({0}, {{0, 0}}), net.host(0), net));
  CHECK_FALSE(can_access(state_with({0}, {{0, 0}}), net.host(1), net));
  CHECK(can_access(state_with({0}, {{0, 2}}), net.host(1), net));
  CHECK_FALSE(can_access(state_with({0}, {{0, 2}}), net.host(2), net));
}

TEST_CASE("apply_exploits") {
  SUBCASE("no exploits leaves the state unchanged") {
    const Network net = two_subnet_network();
    const AdversaryState s = state_with({0}, {{0, 0}});
    CHECK(apply_exploits(s, net.host(0), net) == s);
  }
  SUBCASE("credential harvest adds unseen recent users at base privilege") {
    Network net = build_network(
        1, 3, {{0, 0, HostType::Server, false, true}},
        {{0, {0}, {}}, {0, {0}, {}}, {0, {0}, {}}, {0, {0}, {}},
         {0, {0}, {0}}, {1, {0}, {}}, {0, {0}, {}}, {2, {0}, {0}}});
    const AdversaryState s = state_with({0}, {{4, 0}});
    const AdversaryState t = apply_exploits(s, net.host(0), net);
    CHECK(t.credentials == std::vector<Credential>{{4, 0}, {7, 2}});
    CHECK(apply_exploits(t, net.host(0), net) == t);
  }
  SUBCASE("privilege escalation raises reaching credentials once") {
    const Network net = build_network(
        2, 3, {{0, 0, HostType::Workstation, true, false}},
        {{0, {0}, {0}}, {0, {1}, {}}});
    const AdversaryState s = state_with({0}, {{0, 0}, {1, 0}});
    const AdversaryState t = apply_exploits(s, net.host(0), net);
    CHECK(t.credentials == std::vector<Credential>{{0, 1}, {1, 0}});
    CHECK(apply_exploits(t, net.host(0), net).credentials == t.credentials);
  }
  SUBCASE("escalation stops at the top level") {
    const Network net = build_network(
        1, 2, {{0, 0, HostType::Workstation, true, false}}, {{1, {0}, {0}}});
    const AdversaryState t =
        apply_exploits(state_with({0}, {{0, 1}}), net.host(0), net);
    CHECK(t.credentials == std::vector<Credential>{{0, 1}});
  }
  SUBCASE("exploits fire only on compromised hosts") {
    const Network net = build_network(
        1, 2, {{0, 0}, {0, 0, HostType::Workstation, true, true}},
        {{0, {0}, {0, 1}}});
    const AdversaryState s = state_with({0}, {{0, 0}});
    CHECK(apply_exploits(s, net.host(1), net) == s);
  }
}

TEST_CASE("enumerate_moves") {
  SUBCASE("one-host network has no moves") {
    const Network net = build_network(1, 1, {{0, 0}}, {{0, {0}, {0}}});
    CHECK(enumerate_moves(state_with({0}, {{0, 0}}), net).empty());
  }
  SUBCASE("a domain-wide credential reaches every other host") {
    std::vector<testutil::HostDef> hosts;
    for (int i = 0; i < 10; ++i) hosts.push_back({i % 3, i % 3});
    const Network net = build_network(3, 3, hosts, {{2, {0, 1, 2}, {0}}});
    const auto moves = enumerate_moves(state_with({0}, {{0, 2}}), net);
    CHECK(moves == std::vector<HostId>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  }
  SUBCASE("credentials confined to explored ground give no moves") {
    const Network net = two_subnet_network();
    CHECK(enumerate_moves(state_with({0}, {{0, 0}}), net).empty());
  }
  SUBCASE("moves are exactly the accessible uncompromised hosts") {
    const Network net = generate_network(testutil::small_config(), 8);
    for (UserId u = 0; u < 10; ++u) {
      const AdversaryState s = state_with({0}, {{u, net.user(u).privilege_level}});
      std::vector<HostId> oracle;
      for (const Host& h : net.hosts) {
        if (h.id != 0 && credentials_reach(s.credentials, h, net)) {
          oracle.push_back(h.id);
        }
      }
      CHECK(enumerate_moves(s, net) == oracle);
    }
  }
}

TEST_CASE("score_move") {
  const Network net = two_subnet_network();
  const AdversaryState s = state_with({0}, {{2, 2}}, 3);
  SUBCASE("random weight alone scores every candidate 1") {
    for (HostId h : {1, 2, 3}) {
      CHECK(score_move(s, net.host(h), net, HeuristicWeights::uniform()) == 1.0);
    }
  }
  SUBCASE("goal weight alone singles out the goal") {
    const HeuristicWeights w{0, 0, 10, 0};
    const AdversaryState t = state_with({0}, {{2, 2}}, 1);
    CHECK(score_move(t, net.host(1), net, w) == 10.0);
    CHECK(score_move(t, net.host(2), net, w) == 0.0);
    CHECK(score_move(t, net.host(3), net, w) == 0.0);
  }
  SUBCASE("unexplored subnet weight alone") {
    const HeuristicWeights w{0, 1, 0, 0};
    CHECK(score_move(s, net.host(1), net, w) == 0.0);
    CHECK(score_move(s, net.host(2), net, w) == 1.0);
  }
  SUBCASE("privilege term is normalized by the top level") {
    const HeuristicWeights w{4, 0, 0, 0};
    CHECK(score_move(s, net.host(2), net, w) == 0.0);
    CHECK(score_move(s, net.host(3), net, w) == doctest::Approx(2.0));
    CHECK(score_move(s, net.host(1), net, w) == doctest::Approx(4.0));
  }
  SUBCASE("default weights sum the terms") {
    const HeuristicWeights w;
    CHECK(score_move(s, net.host(3), net, w) == doctest::Approx(4 * 0.5 + 2 + 8 + 1));
  }
}

TEST_CASE("step") {
  SUBCASE("a single candidate is always chosen") {
    const Network net = build_network(1, 1, {{0}, {0}}, {{0, {0}, {0}}});
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      const auto out = step(state_with({0}, {{0, 0}}, 1), net,
                            HeuristicWeights{}, rng);
      REQUIRE(out);
      CHECK(out->host == 1);
      CHECK(out->state.compromised_hosts == std::vector<HostId>{0, 1});
      CHECK(out->state.evaluated_hosts == std::vector<HostId>{0, 1});
    }
  }
  SUBCASE("selection is proportional to score") {
    // Host 1 shares the goal's subnet (score 3), host 2 does not (score 1).
    const Network net = build_network(2, 1, {{0}, {1}, {0}, {1}},
                                      {{0, {0, 1}, {0}}});
    const HeuristicWeights w{0, 0, 2, 1};
    const AdversaryState s = state_with({0, 3}, {{0, 0}}, 1);
    REQUIRE(enumerate_moves(s, net) == std::vector<HostId>{1, 2});
    REQUIRE(score_move(s, net.host(1), net, w) == 3.0);
    REQUIRE(score_move(s, net.host(2), net, w) == 1.0);
    Rng rng(2024);
    int first = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
      first += step(s, net, w, rng)->host == 1;
    }
    CHECK(std::abs(first / static_cast<double>(trials) - 0.75) < 0.02);
  }
  SUBCASE("no candidates is Blocked") {
    const Network net = build_network(1, 1, {{0}}, {{0, {0}, {0}}});
    Rng rng(1);
    CHECK_FALSE(step(state_with({0}, {{0, 0}}), net, HeuristicWeights{}, rng));
  }
}

TEST_CASE("run_episode") {
  SUBCASE("forced path") {
    const Network net = build_network(1, 1, {{0}, {0}}, {{0, {0}, {0, 1}}});
    const Episode ep = run_episode(net, 0, 0, 1, HeuristicWeights{}, 5);
    CHECK(ep.host_sequence() == std::vector<HostId>{0, 1});
    CHECK(ep.outcome == Outcome::GoalReached);
    check_episode_by_oracle(ep, net);
    CHECK(check_episode(ep, net).empty());
  }
  SUBCASE("goal out of reach is Blocked") {
    const Network net = build_network(2, 1, {{0}, {0}, {1}},
                                      {{0, {0}, {0, 1}}, {0, {1}, {2}}});
    const Episode ep = run_episode(net, 0, 0, 2, HeuristicWeights{}, 5);
    CHECK(ep.outcome == Outcome::Blocked);
    CHECK(ep.host_sequence() == std::vector<HostId>{0, 1});
    check_episode_by_oracle(ep, net);
  }
  SUBCASE("harvest opens a new subnet") {
    const Network net = build_network(
        2, 1, {{0, 0, HostType::Workstation, false, true}, {1}},
        {{0, {0}, {0}}, {0, {1}, {0, 1}}});
    const Episode ep = run_episode(net, 0, 0, 1, HeuristicWeights{}, 5);
    CHECK(ep.outcome == Outcome::GoalReached);
    CHECK(ep.steps[0].credentials == std::vector<Credential>{{0, 0}, {1, 0}});
  }
  SUBCASE("determinism") {
    const Network net = generate_network(GenerationConfig{}, 17);
    const Episode a = run_episode(net, net.users[0].accessed_hosts[0], 0, 150,
                                  HeuristicWeights{}, 99);
    const Episode b = run_episode(net, net.users[0].accessed_hosts[0], 0, 150,
                                  HeuristicWeights{}, 99);
    CHECK(a == b);
    check_episode_by_oracle(a, net);
  }
  SUBCASE("invalid starts") {
    const Network net = two_subnet_network();
    auto code = [&](HostId start, UserId user, HostId goal) {
      try {
        run_episode(net, start, user, goal, HeuristicWeights{}, 1);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::IoError;
    };
    CHECK(code(1, 0, 0) == ErrorCode::InvalidStart);
    CHECK(code(0, 0, 0) == ErrorCode::InvalidStart);
    CHECK(code(0, 0, 9) == ErrorCode::InvalidStart);
  }
  SUBCASE("step budget") {
    std::vector<testutil::HostDef> hosts(30, {0});
    std::vector<HostId> all;
    for (int i = 0; i < 30; ++i) all.push_back(i);
    const Network net = build_network(1, 1, hosts, {{0, {0}, all}});
    const Episode ep = run_episode(net, 0, 0, 29, HeuristicWeights::uniform(), 3,
                                   EpisodeLimits{5});
    CHECK(ep.steps.size() <= 6);
    if (ep.outcome != Outcome::GoalReached) {
      CHECK(ep.outcome == Outcome::StepBudgetExhausted);
      CHECK(ep.steps.size() == 6);
    }
    check_episode_by_oracle(ep, net);
  }
}

TEST_CASE("campaigns") {
  const GenerationConfig cfg = testutil::small_config(60, 60, 6);
  const HeuristicWeights w;
  SUBCASE("single episode reproduces") {
    CHECK(run_campaigns(cfg, w, 1, 0) == run_campaigns(cfg, w, 1, 0));
  }
  SUBCASE("each episode runs on a fresh network") {
    const auto eps = run_campaigns(cfg, w, 10, 3);
    REQUIRE(eps.size() == 10);
    std::set<std::string> prints;
    for (std::size_t i = 0; i < eps.size(); ++i) {
      CHECK(eps[i].id == i);
      prints.insert(eps[i].network.fingerprint);
    }
    CHECK(prints.size() == 10);
  }
  SUBCASE("parallel fan-out equals the serial reference") {
    CampaignOptions opts;
    opts.first_index = 40;
    CHECK(run_campaigns(cfg, w, 64, 9, opts) ==
          run_campaigns_serial(cfg, w, 64, 9, opts));
  }
  SUBCASE("first_index shifts the stream") {
    const auto all = run_campaigns(cfg, w, 8, 2);
    CampaignOptions opts;
    opts.first_index = 5;
    const auto tail = run_campaigns(cfg, w, 3, 2, opts);
    CHECK(std::equal(tail.begin(), tail.end(), all.begin() + 5));
  }
  SUBCASE("legality sweep") {
    const auto eps = run_campaigns(GenerationConfig{}, w, 200, 77);
    for (const Episode& ep : eps) {
      const Network net = network_for(ep);
      check_episode_by_oracle(ep, net);
      CHECK(check_episode(ep, net).empty());
      CHECK(net.user_can_access(net.user(ep.start_user), net.host(ep.start_host)));
    }
  }
  SUBCASE("goal type constraint") {
    CampaignOptions opts;
    opts.goal_host_type = HostType::Server;
    for (const Episode& ep : run_campaigns(cfg, w, 30, 4, opts)) {
      const Network net = network_for(ep);
      CHECK(net.host(ep.goal_host).type == HostType::Server);
    }
  }
  SUBCASE("without a budget the outcome does not depend on the weights") {
    CampaignOptions opts;
    opts.max_steps = 0;
    const auto a = run_campaigns(GenerationConfig{}, w, 60, 5, opts);
    const auto b =
        run_campaigns(GenerationConfig{}, HeuristicWeights::uniform(), 60, 5, opts);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].outcome == b[i].outcome);
      CHECK(a[i].outcome != Outcome::StepBudgetExhausted);
    }
  }
}

TEST_CASE("check_episode flags a tampered episode") {
  const Network net = generate_network(GenerationConfig{}, 17);
  Episode ep = run_campaigns(GenerationConfig{}, HeuristicWeights{}, 1, 0)[0];
  const Network own = network_for(ep);
  REQUIRE(check_episode(ep, own).empty());
  if (ep.steps.size() >= 2) {
    ep.steps.push_back(ep.steps[1]);
    CHECK(!check_episode(ep, own).empty());
  }
  ep.network.fingerprint = network_fingerprint(net);
  CHECK_THROWS_AS(network_for(ep), Error);
}

TEST_CASE("episode stream round trip") {
  CampaignOptions opts;
  opts.goal_host_type = HostType::Database;
  const auto eps = run_campaigns(testutil::small_config(), HeuristicWeights{}, 12, 8, opts);
  const std::string text = save_episodes(eps);
  CHECK(std::count(text.begin(), text.end(), '\n') == 12);
  CHECK(load_episodes(text) == eps);
  CHECK(save_episodes(load_episodes(text)) == text);
  CHECK(load_episodes("").empty());
  try {
    load_episodes(text + "{\"id\": 1}\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("13") != std::string::npos);
  }
}
