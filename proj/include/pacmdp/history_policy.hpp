#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pacmdp/ucrl.hpp"

namespace pacmdp {

/// Deterministic non-stationary policy fed one state at a time. Feeding the
/// same state sequence must always produce the same actions, and fork() must
/// return an observationally identical copy whose future observations do not
/// affect the original (the mechanism behind hypothetical-continuation
/// queries).
class HistoryPolicy {
  public:
    virtual ~HistoryPolicy() = default;
    /// Observes the next state of the history and commits to an action for it.
    virtual int on_state(int state) = 0;
    /// Independent deep copy.
    virtual std::unique_ptr<HistoryPolicy> fork() const = 0;
    /// Most recently observed state, or -1 before the first observation.
    virtual int last_state() const = 0;
};

/// Adapts a pure function of the full history; used for scripted and
/// randomized-deterministic policies in tests and experiments.
class FunctionHistoryPolicy final : public HistoryPolicy {
  public:
    using Behavior = std::function<int(const std::vector<int>&)>;
    explicit FunctionHistoryPolicy(Behavior behavior) : behavior_(std::move(behavior)) {}

    int on_state(int state) override {
        history_.push_back(state);
        return behavior_(history_);
    }
    std::unique_ptr<HistoryPolicy> fork() const override { return std::make_unique<FunctionHistoryPolicy>(*this); }
    int last_state() const override { return history_.empty() ? -1 : history_.back(); }

  private:
    Behavior behavior_;
    std::vector<int> history_;
};

/// The learning agent driven as a history policy: observed transitions feed
/// the count/delay/update machinery, and actions come from the current episode
/// policy. Forking copies the full agent state.
class UcrlHistoryPolicy final : public HistoryPolicy {
  public:
    explicit UcrlHistoryPolicy(AgentState agent) : agent_(std::move(agent)) {}

    int on_state(int state) override {
        if (started_) {
            detail::agent_observe(agent_, last_state_, last_action_, state);
            ++agent_.time;
        } else {
            started_ = true;
        }
        agent_.current_state = state;
        last_state_ = state;
        last_action_ = agent_.action_at(state);
        return last_action_;
    }
    std::unique_ptr<HistoryPolicy> fork() const override { return std::make_unique<UcrlHistoryPolicy>(*this); }
    int last_state() const override { return started_ ? last_state_ : -1; }

    const AgentState& agent() const { return agent_; }

  private:
    AgentState agent_;
    bool started_ = false;
    int last_state_ = -1;
    int last_action_ = 0;
};

} // namespace pacmdp
