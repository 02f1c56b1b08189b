#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dplac/core/error.hpp"
#include "dplac/core/rng.hpp"
#include "dplac/nn/binary_io.hpp"
#include "dplac/nn/tensor.hpp"

namespace dplac::lac {

using nn::RowMatrix;

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    bool done = false;
};

struct Batch {
    RowMatrix states;
    RowMatrix actions;
    Eigen::VectorXd rewards;
    RowMatrix next_states;
    Eigen::VectorXd done;  // 1.0 for terminal transitions

    [[nodiscard]] Eigen::Index size() const noexcept { return states.rows(); }
};

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int state_dim, int action_dim)
        : capacity_(capacity),
          states_(static_cast<Eigen::Index>(capacity), state_dim),
          actions_(static_cast<Eigen::Index>(capacity), action_dim),
          rewards_(static_cast<Eigen::Index>(capacity)),
          next_(static_cast<Eigen::Index>(capacity), state_dim),
          done_(static_cast<Eigen::Index>(capacity)) {
        if (capacity == 0 || state_dim < 1 || action_dim < 1) throw ConfigError("replay buffer dimensions must be positive");
    }

    void add(const Transition& t) {
        if (t.state.size() != states_.cols() || t.next_state.size() != states_.cols() ||
            t.action.size() != actions_.cols())
            throw ShapeError("transition does not match the buffer layout");
        const auto i = static_cast<Eigen::Index>(cursor_);
        states_.row(i) = t.state.transpose();
        actions_.row(i) = t.action.transpose();
        rewards_[i] = t.reward;
        next_.row(i) = t.next_state.transpose();
        done_[i] = t.done ? 1.0 : 0.0;
        cursor_ = (cursor_ + 1) % capacity_;
        size_ = std::min(size_ + 1, capacity_);
        ++added_;
    }

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] std::size_t cursor() const noexcept { return cursor_; }
    [[nodiscard]] std::size_t total_added() const noexcept { return added_; }
    [[nodiscard]] bool ready(std::size_t batch) const noexcept { return size_ >= batch; }

    /// Uniform draw with replacement.
    [[nodiscard]] Batch sample(std::size_t batch, Rng& rng) const {
        if (!ready(batch)) throw Error("replay buffer holds fewer transitions than the batch size");
        const auto b = static_cast<Eigen::Index>(batch);
        Batch out{RowMatrix(b, states_.cols()), RowMatrix(b, actions_.cols()), Eigen::VectorXd(b),
                  RowMatrix(b, states_.cols()), Eigen::VectorXd(b)};
        for (Eigen::Index k = 0; k < b; ++k) {
            const auto i = static_cast<Eigen::Index>(rng.uniform_int(0, static_cast<std::int64_t>(size_) - 1));
            out.states.row(k) = states_.row(i);
            out.actions.row(k) = actions_.row(i);
            out.rewards[k] = rewards_[i];
            out.next_states.row(k) = next_.row(i);
            out.done[k] = done_[i];
        }
        return out;
    }

    /// Transition at slot `i` (0 = oldest still held).
    [[nodiscard]] Transition at(std::size_t i) const {
        if (i >= size_) throw Error("replay index out of range");
        const auto slot = static_cast<Eigen::Index>((size_ < capacity_ ? i : (cursor_ + i) % capacity_));
        return {states_.row(slot).transpose(), actions_.row(slot).transpose(), rewards_[slot],
                next_.row(slot).transpose(), done_[slot] != 0.0};
    }

    /// Full contents, counters included.
    void write(nn::BinaryWriter& w) const {
        w.u64(capacity_);
        w.u64(static_cast<std::uint64_t>(states_.cols()));
        w.u64(static_cast<std::uint64_t>(actions_.cols()));
        w.u64(cursor_);
        w.u64(size_);
        w.u64(added_);
        w.f64s(states_.data(), static_cast<std::size_t>(states_.size()));
        w.f64s(actions_.data(), static_cast<std::size_t>(actions_.size()));
        w.f64s(rewards_.data(), static_cast<std::size_t>(rewards_.size()));
        w.f64s(next_.data(), static_cast<std::size_t>(next_.size()));
        w.f64s(done_.data(), static_cast<std::size_t>(done_.size()));
    }

    void read(nn::BinaryReader& r) {
        if (r.u64() != capacity_ || r.u64() != static_cast<std::uint64_t>(states_.cols()) ||
            r.u64() != static_cast<std::uint64_t>(actions_.cols()))
            throw FormatError("replay snapshot does not match the buffer layout");
        cursor_ = r.u64();
        size_ = r.u64();
        added_ = r.u64();
        if (cursor_ >= capacity_ || size_ > capacity_) throw FormatError("corrupt replay snapshot counters");
        r.f64s(states_.data(), static_cast<std::size_t>(states_.size()));
        r.f64s(actions_.data(), static_cast<std::size_t>(actions_.size()));
        r.f64s(rewards_.data(), static_cast<std::size_t>(rewards_.size()));
        r.f64s(next_.data(), static_cast<std::size_t>(next_.size()));
        r.f64s(done_.data(), static_cast<std::size_t>(done_.size()));
    }

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::size_t size_ = 0;
    std::size_t added_ = 0;
    RowMatrix states_;
    RowMatrix actions_;
    Eigen::VectorXd rewards_;
    RowMatrix next_;
    Eigen::VectorXd done_;
};

}  // namespace dplac::lac
