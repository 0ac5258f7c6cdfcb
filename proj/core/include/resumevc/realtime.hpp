#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "resumevc/broker.hpp"
#include "resumevc/clock.hpp"
#include "resumevc/did.hpp"
#include "resumevc/encoding.hpp"
#include "resumevc/framing.hpp"

namespace resumevc::messaging {

inline constexpr std::size_t kPendingBound = 1000;

enum class FrameType { request, response, ack };

std::string_view frame_type_name(FrameType type);
/// Throws Error("malformed-frame").
FrameType frame_type_from_name(std::string_view name);

/// Wire frame: {"frameType","payload"(base64url),"id"}.
struct Frame {
    FrameType type = FrameType::ack;
    Bytes payload;
    std::string id;

    std::string serialize() const;
    /// Throws Error("malformed-frame").
    static Frame parse(std::string_view text);

    bool operator==(const Frame &) const = default;
};

enum class DeliveryStatus { delivered, buffered };

std::string_view delivery_status_name(DeliveryStatus status);

struct ChannelSession {
    std::string session_id;
    did::Did party_did;
    bool connected = false;
    /// Buffered while disconnected; `topic` holds the frame type.
    std::vector<QueueMessage> pending;
};

/// Delivers one message to a connected party. Returns false if the party did
/// not take it, which marks the session disconnected.
using ChannelSink = std::function<bool(const QueueMessage &)>;

/// Per-party push channel with FIFO buffering across disconnects.
class RealtimeHub {
  public:
    explicit RealtimeHub(Clock clock = system_clock(), std::size_t pending_bound = kPendingBound);

    /// Opens or resumes the party's session and drains its pending buffer in
    /// FIFO order. Returns the session and a generation token for disconnect().
    std::pair<ChannelSession, std::uint64_t> channel_register(const did::Did &party, ChannelSink sink);
    /// Ignored if `generation` is not the party's current connection.
    void disconnect(const did::Did &party, std::uint64_t generation);

    /// Throws Error("buffer-overflow") when the pending buffer is full.
    DeliveryStatus channel_push(const did::Did &party, std::span<const std::uint8_t> payload,
                                FrameType type = FrameType::request);

    std::optional<ChannelSession> session(const did::Did &party) const;

  private:
    struct Slot {
        explicit Slot(ChannelSession s) : session(std::move(s)) {}
        std::mutex mutex; // serializes delivery for one party
        ChannelSession session;
        ChannelSink sink;
        std::uint64_t generation = 0;
    };

    std::shared_ptr<Slot> slot(const did::Did &party);

    Clock clock_;
    std::size_t bound_;
    mutable std::mutex mutex_;
    std::map<did::Did, std::shared_ptr<Slot>> slots_;
    std::uint64_t next_generation_ = 1;
};

/// TCP front end of a RealtimeHub.
///
/// A client opens with an ack frame whose payload is its DID. Server-to-client
/// request/response frames must be acked by id within the ack timeout or the
/// session drops to buffering. Client-to-server frames:
///   request  {"holderDid","request"}            pushed to holderDid
///   response {"requestId","verifierDid","envelope"} pushed to verifierDid
/// and each is answered with an ack carrying the same id and the delivery
/// status (or "error:<code>").
class RealtimeServer {
  public:
    RealtimeServer(RealtimeHub &hub, std::uint16_t port,
                   std::chrono::milliseconds ack_timeout = std::chrono::milliseconds(2000));
    ~RealtimeServer();
    RealtimeServer(const RealtimeServer &) = delete;
    RealtimeServer &operator=(const RealtimeServer &) = delete;

    std::uint16_t port() const noexcept { return listener_.port(); }
    void stop();

  private:
    struct Connection;
    void serve(std::shared_ptr<Connection> conn);

    RealtimeHub &hub_;
    std::chrono::milliseconds ack_timeout_;
    net::Listener listener_;
    std::thread accept_thread_;
    std::mutex mutex_;
    std::vector<std::thread> workers_;
    std::vector<std::weak_ptr<Connection>> connections_;
    std::atomic<bool> stopping_{false};
};

/// Client side of the realtime channel. Incoming request/response frames are
/// acked automatically after the callback returns.
class RealtimeClient {
  public:
    using Callback = std::function<void(const Frame &)>;

    /// Throws Error("connect-failed").
    RealtimeClient(const std::string &host, std::uint16_t port, const did::Did &self, Callback callback);
    ~RealtimeClient();
    RealtimeClient(const RealtimeClient &) = delete;
    RealtimeClient &operator=(const RealtimeClient &) = delete;

    /// Sends a frame and waits for the server's ack. Returns the ack payload
    /// ("delivered", "buffered" or "error:<code>"). Throws Error("channel-closed").
    std::string send(FrameType type, std::span<const std::uint8_t> payload,
                     std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));
    /// Drops the connection without a goodbye.
    void close();
    bool connected() const;

  private:
    void reader();

    net::Socket socket_;
    Callback callback_;
    std::thread reader_thread_;
    mutable std::mutex mutex_;
    std::condition_variable acked_;
    std::map<std::string, std::string> acks_;
    std::mutex send_mutex_;
    bool open_ = true;
};

/// Forwards presentation-request notifications from a broker topic to the
/// realtime hub. Messages carry {"holderDid","request"}.
class RequestBridge {
  public:
    static constexpr const char *kTopic = "presentation-requests";
    static constexpr const char *kSubscriber = "realtime-bridge";

    RequestBridge(MessageQueue &queue, RealtimeHub &hub);

    /// Handles everything currently queued. Returns the number handled.
    std::size_t drain();
    void start(std::chrono::milliseconds idle_sleep = std::chrono::milliseconds(20));
    void stop();

  private:
    RealtimeHub &hub_;
    std::set<std::string> seen_;
    std::unique_ptr<Subscription> subscription_;
};

/// Bytes published to RequestBridge::kTopic for one request.
Bytes request_notification(const did::Did &holder, const Json &request_frame);

} // namespace resumevc::messaging
