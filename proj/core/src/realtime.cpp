#include "resumevc/realtime.hpp"

#include "resumevc/crypto.hpp"
#include "resumevc/error.hpp"

namespace resumevc::messaging {

std::string_view frame_type_name(FrameType type) {
    switch (type) {
    case FrameType::request:
        return "request";
    case FrameType::response:
        return "response";
    case FrameType::ack:
        return "ack";
    }
    return "ack";
}

FrameType frame_type_from_name(std::string_view name) {
    for (auto t : {FrameType::request, FrameType::response, FrameType::ack}) {
        if (frame_type_name(t) == name) {
            return t;
        }
    }
    throw Error("malformed-frame", "unknown frame type '" + std::string(name) + "'");
}

std::string_view delivery_status_name(DeliveryStatus status) {
    return status == DeliveryStatus::delivered ? "delivered" : "buffered";
}

std::string Frame::serialize() const {
    return canonical_json(
        Json{{"frameType", std::string(frame_type_name(type))}, {"payload", base64url_encode(payload)}, {"id", id}});
}

Frame Frame::parse(std::string_view text) {
    try {
        const auto json = Json::parse(text);
        return Frame{.type = frame_type_from_name(json.at("frameType").get<std::string>()),
                     .payload = base64url_decode(json.at("payload").get<std::string>()),
                     .id = json.value("id", std::string{})};
    } catch (const Json::exception &e) {
        throw Error("malformed-frame", e.what());
    } catch (const Error &e) {
        if (e.code() == "malformed-frame") {
            throw;
        }
        throw Error("malformed-frame", e.what());
    }
}

// RealtimeHub ----------------------------------------------------------------

RealtimeHub::RealtimeHub(Clock clock, std::size_t pending_bound) : clock_(std::move(clock)), bound_(pending_bound) {}

std::shared_ptr<RealtimeHub::Slot> RealtimeHub::slot(const did::Did &party) {
    std::lock_guard lock(mutex_);
    auto &s = slots_[party];
    if (!s) {
        s = std::make_shared<Slot>(ChannelSession{crypto::random_id(12), party, false, {}});
    }
    return s;
}

std::pair<ChannelSession, std::uint64_t> RealtimeHub::channel_register(const did::Did &party, ChannelSink sink) {
    auto s = slot(party);
    std::uint64_t generation = 0;
    {
        std::lock_guard lock(mutex_);
        generation = next_generation_++;
    }
    std::lock_guard lock(s->mutex);
    s->sink = std::move(sink);
    s->generation = generation;
    s->session.connected = true;
    auto &pending = s->session.pending;
    std::size_t sent = 0;
    while (sent < pending.size()) {
        if (!s->sink(pending[sent])) {
            s->session.connected = false;
            s->sink = nullptr;
            break;
        }
        ++sent;
    }
    pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(sent));
    return {s->session, generation};
}

void RealtimeHub::disconnect(const did::Did &party, std::uint64_t generation) {
    auto s = slot(party);
    std::lock_guard lock(s->mutex);
    if (s->generation == generation) {
        s->session.connected = false;
        s->sink = nullptr;
    }
}

DeliveryStatus RealtimeHub::channel_push(const did::Did &party, std::span<const std::uint8_t> payload,
                                         FrameType type) {
    auto s = slot(party);
    QueueMessage msg{.message_id = crypto::random_id(12),
                     .topic = std::string(frame_type_name(type)),
                     .payload = Bytes(payload.begin(), payload.end()),
                     .enqueued_at = clock_(),
                     .attempts = 1};
    std::lock_guard lock(s->mutex);
    if (s->session.connected && s->session.pending.empty()) {
        if (s->sink(msg)) {
            return DeliveryStatus::delivered;
        }
        s->session.connected = false;
        s->sink = nullptr;
    }
    if (s->session.pending.size() >= bound_) {
        throw Error("buffer-overflow", "pending buffer for " + party.str() + " is full");
    }
    s->session.pending.push_back(std::move(msg));
    return DeliveryStatus::buffered;
}

std::optional<ChannelSession> RealtimeHub::session(const did::Did &party) const {
    std::shared_ptr<Slot> s;
    {
        std::lock_guard lock(mutex_);
        auto it = slots_.find(party);
        if (it == slots_.end()) {
            return std::nullopt;
        }
        s = it->second;
    }
    std::lock_guard lock(s->mutex);
    return s->session;
}

// RealtimeServer -------------------------------------------------------------

struct RealtimeServer::Connection {
    explicit Connection(net::Socket s) : socket(std::move(s)) {}

    bool send(const Frame &frame) {
        std::lock_guard lock(send_mutex);
        return socket.send_frame(frame.serialize());
    }

    net::Socket socket;
    std::mutex send_mutex;
    std::mutex mutex;
    std::condition_variable cv;
    std::set<std::string> acks;
    bool alive = true;
};

RealtimeServer::RealtimeServer(RealtimeHub &hub, std::uint16_t port, std::chrono::milliseconds ack_timeout)
    : hub_(hub), ack_timeout_(ack_timeout), listener_(port) {
    accept_thread_ = std::thread([this] {
        while (!stopping_) {
            auto sock = listener_.accept();
            if (!sock) {
                return;
            }
            auto conn = std::make_shared<Connection>(std::move(*sock));
            std::lock_guard lock(mutex_);
            if (stopping_) {
                return;
            }
            connections_.push_back(conn);
            workers_.emplace_back([this, conn] { serve(conn); });
        }
    });
}

RealtimeServer::~RealtimeServer() { stop(); }

void RealtimeServer::stop() {
    if (stopping_.exchange(true)) {
        return;
    }
    listener_.close();
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mutex_);
        for (auto &weak : connections_) {
            if (auto conn = weak.lock()) {
                conn->socket.shutdown();
            }
        }
        workers.swap(workers_);
    }
    for (auto &w : workers) {
        w.join();
    }
}

void RealtimeServer::serve(std::shared_ptr<Connection> conn) {
    auto first = conn->socket.recv_frame();
    if (!first) {
        return;
    }
    std::optional<did::Did> party;
    try {
        const auto hello = Frame::parse(*first);
        if (hello.type == FrameType::ack) {
            party = did::Did::parse(to_string(hello.payload));
        }
    } catch (const Error &) {
    }
    if (!party) {
        conn->send(Frame{FrameType::ack, to_bytes("error:bad-handshake"), ""});
        return;
    }

    const auto timeout = ack_timeout_;
    ChannelSink sink = [conn, timeout](const QueueMessage &msg) {
        if (!conn->send(Frame{frame_type_from_name(msg.topic), msg.payload, msg.message_id})) {
            return false;
        }
        std::unique_lock lock(conn->mutex);
        const bool ok = conn->cv.wait_for(lock, timeout,
                                          [&] { return conn->acks.contains(msg.message_id) || !conn->alive; });
        return ok && conn->acks.erase(msg.message_id) > 0;
    };

    // Registration drains the pending buffer, which needs this thread free to
    // read the client's acks.
    std::uint64_t generation = 0;
    std::mutex gen_mutex;
    std::thread registrar([&] {
        auto [session, gen] = hub_.channel_register(*party, sink);
        std::lock_guard lock(gen_mutex);
        generation = gen;
        conn->send(Frame{FrameType::ack, to_bytes(session.session_id), "hello"});
    });

    while (auto text = conn->socket.recv_frame()) {
        Frame frame;
        try {
            frame = Frame::parse(*text);
        } catch (const Error &e) {
            conn->send(Frame{FrameType::ack, to_bytes("error:" + e.code()), ""});
            continue;
        }
        if (frame.type == FrameType::ack) {
            std::lock_guard lock(conn->mutex);
            conn->acks.insert(frame.id);
            conn->cv.notify_all();
            continue;
        }
        std::string status;
        try {
            const auto body = Json::parse(to_string(frame.payload));
            const auto target = did::Did::parse(
                body.at(frame.type == FrameType::request ? "holderDid" : "verifierDid").get<std::string>());
            const Bytes forward = frame.type == FrameType::request
                                      ? to_bytes(canonical_json(body.at("request")))
                                      : frame.payload;
            status = std::string(delivery_status_name(hub_.channel_push(target, forward, frame.type)));
        } catch (const Error &e) {
            status = "error:" + e.code();
        } catch (const Json::exception &) {
            status = "error:malformed-frame";
        }
        conn->send(Frame{FrameType::ack, to_bytes(status), frame.id});
    }

    {
        std::lock_guard lock(conn->mutex);
        conn->alive = false;
        conn->cv.notify_all();
    }
    registrar.join();
    std::lock_guard lock(gen_mutex);
    hub_.disconnect(*party, generation);
}

// RealtimeClient -------------------------------------------------------------

RealtimeClient::RealtimeClient(const std::string &host, std::uint16_t port, const did::Did &self, Callback callback)
    : socket_(net::connect_tcp(host, port)), callback_(std::move(callback)) {
    if (!socket_.send_frame(Frame{FrameType::ack, to_bytes(self.str()), "hello"}.serialize())) {
        throw Error("connect-failed", "handshake failed");
    }
    reader_thread_ = std::thread([this] { reader(); });
    std::unique_lock lock(mutex_);
    acked_.wait_for(lock, std::chrono::seconds(10), [&] { return acks_.contains("hello") || !open_; });
    if (!acks_.contains("hello")) {
        lock.unlock();
        close();
        throw Error("connect-failed", "no handshake acknowledgment");
    }
}

RealtimeClient::~RealtimeClient() { close(); }

void RealtimeClient::reader() {
    while (auto text = socket_.recv_frame()) {
        Frame frame;
        try {
            frame = Frame::parse(*text);
        } catch (const Error &) {
            continue;
        }
        if (frame.type == FrameType::ack) {
            std::lock_guard lock(mutex_);
            acks_[frame.id] = to_string(frame.payload);
            acked_.notify_all();
            continue;
        }
        try {
            if (callback_) {
                callback_(frame);
            }
        } catch (...) {
            continue; // unacked: the server buffers it for the next connection
        }
        std::lock_guard lock(send_mutex_);
        socket_.send_frame(Frame{FrameType::ack, {}, frame.id}.serialize());
    }
    std::lock_guard lock(mutex_);
    open_ = false;
    acked_.notify_all();
}

std::string RealtimeClient::send(FrameType type, std::span<const std::uint8_t> payload,
                                 std::chrono::milliseconds timeout) {
    const auto id = crypto::random_id(8);
    {
        std::lock_guard lock(send_mutex_);
        if (!socket_.send_frame(Frame{type, Bytes(payload.begin(), payload.end()), id}.serialize())) {
            throw Error("channel-closed", "realtime connection is closed");
        }
    }
    std::unique_lock lock(mutex_);
    if (!acked_.wait_for(lock, timeout, [&] { return acks_.contains(id) || !open_; }) || !acks_.contains(id)) {
        throw Error("channel-closed", "no acknowledgment from the realtime server");
    }
    auto status = std::move(acks_.at(id));
    acks_.erase(id);
    return status;
}

void RealtimeClient::close() {
    socket_.shutdown();
    if (reader_thread_.joinable() && reader_thread_.get_id() != std::this_thread::get_id()) {
        reader_thread_.join();
    }
    socket_.close();
}

bool RealtimeClient::connected() const {
    std::lock_guard lock(mutex_);
    return open_;
}

// RequestBridge --------------------------------------------------------------

Bytes request_notification(const did::Did &holder, const Json &request_frame) {
    return to_bytes(canonical_json(Json{{"holderDid", holder.str()}, {"request", request_frame}}));
}

RequestBridge::RequestBridge(MessageQueue &queue, RealtimeHub &hub) : hub_(hub) {
    subscription_ = consume(queue, kTopic, kSubscriber, [this](const QueueMessage &msg) {
        if (seen_.contains(msg.message_id)) {
            return;
        }
        const auto body = Json::parse(to_string(msg.payload));
        const auto holder = did::Did::parse(body.at("holderDid").get<std::string>());
        hub_.channel_push(holder, to_bytes(canonical_json(body.at("request"))), FrameType::request);
        seen_.insert(msg.message_id);
    });
}

std::size_t RequestBridge::drain() { return subscription_->drain(); }

void RequestBridge::start(std::chrono::milliseconds idle_sleep) { subscription_->start(idle_sleep); }

void RequestBridge::stop() { subscription_->stop(); }

} // namespace resumevc::messaging
