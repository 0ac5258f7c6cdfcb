#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>

namespace resumevc {

/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

/// Services read time through a Clock so tests and scenarios can drive it.
using Clock = std::function<Timestamp()>;

inline Timestamp system_now() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

inline Clock system_clock() { return &system_now; }

class ManualClock {
  public:
    explicit ManualClock(Timestamp start) : now_(std::make_shared<std::atomic<Timestamp>>(start)) {}

    Timestamp now() const { return now_->load(); }
    void advance(std::int64_t seconds) { now_->fetch_add(seconds); }
    void set(Timestamp t) { now_->store(t); }

    Clock clock() const {
        return [now = now_] { return now->load(); };
    }

  private:
    std::shared_ptr<std::atomic<Timestamp>> now_;
};

} // namespace resumevc
