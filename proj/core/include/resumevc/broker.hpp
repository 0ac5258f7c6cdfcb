#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/encoding.hpp"
#include "resumevc/framing.hpp"

namespace resumevc::messaging {

struct QueueMessage {
    std::string message_id;
    std::string topic;
    Bytes payload;
    Timestamp enqueued_at = 0;
    /// Deliveries to the fetching subscriber, including this one.
    std::uint32_t attempts = 0;

    /// {"messageId","topic","payload"(base64url),"enqueuedAt","attempts"}
    Json to_json() const;
    static QueueMessage from_json(const Json &json);

    bool operator==(const QueueMessage &) const = default;
};

/// Publish/fetch/ack contract shared by the in-process Broker and the socket
/// BrokerClient. Delivery is at-least-once with fan-out: every subscriber of
/// a topic sees every message published to it, including messages published
/// before it subscribed. Operations throw Error("broker-unavailable") when the
/// broker is down.
class MessageQueue {
  public:
    virtual ~MessageQueue() = default;

    /// Durable before return. Throws Error("invalid-topic") for an empty topic.
    virtual std::string publish(std::string_view topic, std::span<const std::uint8_t> payload) = 0;
    /// Idempotent publish: a second call with the same id is a no-op.
    virtual void publish_with_id(std::string_view message_id, std::string_view topic,
                                 std::span<const std::uint8_t> payload) = 0;
    virtual void subscribe(std::string_view topic, std::string_view subscriber) = 0;
    /// Next message that is neither acknowledged by `subscriber` nor in flight
    /// inside its visibility window.
    virtual std::optional<QueueMessage> fetch(std::string_view topic, std::string_view subscriber) = 0;
    virtual void ack(std::string_view topic, std::string_view subscriber, std::string_view message_id) = 0;
    /// Makes an in-flight message immediately deliverable again.
    virtual void nack(std::string_view topic, std::string_view subscriber, std::string_view message_id) = 0;
};

/// Points at which a test fault injector may crash the broker.
enum class FaultPoint {
    publish_before_append,
    publish_after_append,
    fetch_before_append,
    fetch_after_append,
    ack_before_append,
    ack_after_append,
};

/// Milliseconds on a monotonic timeline; drives visibility timeouts.
using MillisClock = std::function<std::int64_t()>;

MillisClock steady_millis();

struct BrokerOptions {
    /// Append-only journal. Without it the broker is memory-only and cannot
    /// survive restart().
    std::optional<std::filesystem::path> log_path;
    std::chrono::milliseconds visibility_window{30'000};
    Clock clock = system_clock();
    MillisClock millis = steady_millis();
};

class Broker final : public MessageQueue {
  public:
    explicit Broker(BrokerOptions options = {});
    Broker(const Broker &) = delete;
    Broker &operator=(const Broker &) = delete;

    std::string publish(std::string_view topic, std::span<const std::uint8_t> payload) override;
    void publish_with_id(std::string_view message_id, std::string_view topic,
                         std::span<const std::uint8_t> payload) override;
    void subscribe(std::string_view topic, std::string_view subscriber) override;
    std::optional<QueueMessage> fetch(std::string_view topic, std::string_view subscriber) override;
    void ack(std::string_view topic, std::string_view subscriber, std::string_view message_id) override;
    void nack(std::string_view topic, std::string_view subscriber, std::string_view message_id) override;

    /// Returning true from the injector crashes the broker at that point:
    /// the call throws broker-unavailable and every call fails until restart().
    void set_fault_injector(std::function<bool(FaultPoint)> injector);
    /// Discards in-memory state and rebuilds it from the journal. In-flight
    /// deliveries become immediately visible again.
    void restart();
    bool crashed() const;

    std::size_t message_count() const;

  private:
    struct Delivery {
        std::uint32_t attempts = 0;
        std::int64_t visible_at = 0;
        bool in_flight = false;
    };
    struct SubscriberState {
        std::set<std::string> acked;
        std::map<std::string, Delivery> deliveries;
    };
    struct State {
        std::map<std::string, QueueMessage> messages;          // by id
        std::map<std::string, std::vector<std::string>> topics; // topic -> ids in publish order
        std::map<std::pair<std::string, std::string>, SubscriberState> subscribers;
    };

    void check_up_locked() const;
    void maybe_crash_locked(FaultPoint point);
    void append_locked(const Json &record);
    void apply(const Json &record, bool replaying);
    void load_journal();
    SubscriberState &subscriber_locked(std::string_view topic, std::string_view subscriber, bool journal);

    BrokerOptions options_;
    mutable std::mutex mutex_;
    std::ofstream journal_;
    std::function<bool(FaultPoint)> injector_;
    bool crashed_ = false;
    State state_;
};

/// Serves a MessageQueue over length-prefixed JSON frames.
/// Requests: {"verb":"PUB","topic","payload","messageId"?},
/// {"verb":"SUB","topic","subscriber"} (subscribes and fetches one message),
/// {"verb":"ACK"|"NACK","topic","subscriber","messageId"}.
/// Replies: {"ok":true,...} or {"ok":false,"code","message"}.
class BrokerServer {
  public:
    BrokerServer(MessageQueue &queue, std::uint16_t port);
    ~BrokerServer();
    BrokerServer(const BrokerServer &) = delete;
    BrokerServer &operator=(const BrokerServer &) = delete;

    std::uint16_t port() const noexcept { return listener_.port(); }
    void stop();

  private:
    void serve(net::Socket socket);

    MessageQueue &queue_;
    net::Listener listener_;
    std::thread accept_thread_;
    std::mutex mutex_;
    std::vector<std::thread> workers_;
    std::vector<int> open_fds_;
    std::atomic<bool> stopping_{false};
};

class BrokerClient final : public MessageQueue {
  public:
    BrokerClient(const std::string &host, std::uint16_t port);

    std::string publish(std::string_view topic, std::span<const std::uint8_t> payload) override;
    void publish_with_id(std::string_view message_id, std::string_view topic,
                         std::span<const std::uint8_t> payload) override;
    void subscribe(std::string_view topic, std::string_view subscriber) override;
    std::optional<QueueMessage> fetch(std::string_view topic, std::string_view subscriber) override;
    void ack(std::string_view topic, std::string_view subscriber, std::string_view message_id) override;
    void nack(std::string_view topic, std::string_view subscriber, std::string_view message_id) override;

  private:
    Json call(const Json &request);

    std::string host_;
    std::uint16_t port_;
    std::mutex mutex_;
    net::Socket socket_;
};

/// Consumer loop over a MessageQueue. The handler's success acknowledges the
/// message; an exception nacks it for redelivery. Invocations for one
/// subscription are serialized.
class Subscription {
  public:
    using Handler = std::function<void(const QueueMessage &)>;

    Subscription(MessageQueue &queue, std::string topic, std::string subscriber, Handler handler);
    ~Subscription();
    Subscription(const Subscription &) = delete;
    Subscription &operator=(const Subscription &) = delete;

    /// Handles at most one message on the calling thread. Returns true if a
    /// message was fetched.
    bool poll_once();
    /// Handles messages until none is immediately available.
    std::size_t drain();

    /// Background polling thread.
    void start(std::chrono::milliseconds idle_sleep = std::chrono::milliseconds(20));
    void stop();

    const std::string &topic() const noexcept { return topic_; }
    const std::string &subscriber() const noexcept { return subscriber_; }

  private:
    MessageQueue &queue_;
    std::string topic_;
    std::string subscriber_;
    Handler handler_;
    std::mutex handler_mutex_;
    std::atomic<bool> running_{false};
    std::thread thread_;
};

/// Subscribes `subscriber` to `topic` and returns its consumer handle.
std::unique_ptr<Subscription> consume(MessageQueue &queue, std::string topic, std::string subscriber,
                                      Subscription::Handler handler);

} // namespace resumevc::messaging
