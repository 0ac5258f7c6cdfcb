#include "resumevc/broker.hpp"

#include <sys/socket.h>

#include <sstream>

#include "resumevc/crypto.hpp"
#include "resumevc/error.hpp"

namespace resumevc::messaging {

namespace {

[[noreturn]] void unavailable(const std::string &why) { throw Error("broker-unavailable", why); }

} // namespace

MillisClock steady_millis() {
    return [] {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now().time_since_epoch())
            .count();
    };
}

// QueueMessage ---------------------------------------------------------------

Json QueueMessage::to_json() const {
    return Json{{"messageId", message_id},
                {"topic", topic},
                {"payload", base64url_encode(payload)},
                {"enqueuedAt", enqueued_at},
                {"attempts", attempts}};
}

QueueMessage QueueMessage::from_json(const Json &json) {
    try {
        return QueueMessage{.message_id = json.at("messageId").get<std::string>(),
                            .topic = json.at("topic").get<std::string>(),
                            .payload = base64url_decode(json.at("payload").get<std::string>()),
                            .enqueued_at = json.at("enqueuedAt").get<Timestamp>(),
                            .attempts = json.at("attempts").get<std::uint32_t>()};
    } catch (const Json::exception &e) {
        throw Error("malformed-message", e.what());
    }
}

// Broker ---------------------------------------------------------------------

Broker::Broker(BrokerOptions options) : options_(std::move(options)) {
    std::lock_guard lock(mutex_);
    load_journal();
}

void Broker::load_journal() {
    state_ = State{};
    if (journal_.is_open()) {
        journal_.close();
    }
    if (!options_.log_path) {
        return;
    }
    std::uintmax_t good = 0;
    bool needs_newline = false;
    {
        std::ifstream in(*options_.log_path, std::ios::binary);
        std::string line;
        while (in && std::getline(in, line)) {
            const bool terminated = !in.eof();
            if (!line.empty()) {
                Json record;
                try {
                    record = Json::parse(line);
                } catch (const Json::exception &) {
                    break; // torn tail from a crash mid-append
                }
                apply(record, true);
            }
            good += line.size() + (terminated ? 1 : 0);
            needs_newline = !terminated && !line.empty();
        }
    }
    std::error_code ec;
    if (std::filesystem::exists(*options_.log_path, ec) && std::filesystem::file_size(*options_.log_path, ec) != good) {
        std::filesystem::resize_file(*options_.log_path, good, ec);
        if (ec) {
            throw Error("io-failure", "cannot truncate broker journal: " + ec.message());
        }
    }
    journal_.open(*options_.log_path, std::ios::binary | std::ios::app);
    if (!journal_) {
        throw Error("io-failure", "cannot open broker journal " + options_.log_path->string());
    }
    if (needs_newline) {
        journal_ << '\n';
        journal_.flush();
    }
}

void Broker::check_up_locked() const {
    if (crashed_) {
        unavailable("broker is down");
    }
}

void Broker::maybe_crash_locked(FaultPoint point) {
    if (injector_ && injector_(point)) {
        crashed_ = true;
        unavailable("injected crash");
    }
}

void Broker::append_locked(const Json &record) {
    if (!journal_.is_open()) {
        return;
    }
    journal_ << canonical_json(record) << '\n';
    journal_.flush();
    if (!journal_) {
        crashed_ = true;
        unavailable("journal write failed");
    }
}

void Broker::apply(const Json &record, bool replaying) {
    const auto op = record.at("op").get<std::string>();
    if (op == "PUB") {
        auto msg = QueueMessage::from_json(record.at("message"));
        if (state_.messages.contains(msg.message_id)) {
            return;
        }
        state_.topics[msg.topic].push_back(msg.message_id);
        state_.messages.emplace(msg.message_id, std::move(msg));
        return;
    }
    auto &sub = state_.subscribers[{record.at("topic").get<std::string>(), record.at("subscriber").get<std::string>()}];
    if (op == "SUB") {
        return;
    }
    const auto id = record.at("messageId").get<std::string>();
    if (op == "DLV") {
        auto &d = sub.deliveries[id];
        ++d.attempts;
        d.in_flight = !replaying;
        d.visible_at = replaying ? 0 : options_.millis() + options_.visibility_window.count();
    } else if (op == "ACK") {
        sub.acked.insert(id);
        sub.deliveries.erase(id);
    }
}

Broker::SubscriberState &Broker::subscriber_locked(std::string_view topic, std::string_view subscriber,
                                                   bool journal) {
    const std::pair<std::string, std::string> key{std::string(topic), std::string(subscriber)};
    auto it = state_.subscribers.find(key);
    if (it != state_.subscribers.end()) {
        return it->second;
    }
    if (journal) {
        append_locked(Json{{"op", "SUB"}, {"topic", key.first}, {"subscriber", key.second}});
    }
    return state_.subscribers[key];
}

std::string Broker::publish(std::string_view topic, std::span<const std::uint8_t> payload) {
    auto id = crypto::random_id(16);
    publish_with_id(id, topic, payload);
    return id;
}

void Broker::publish_with_id(std::string_view message_id, std::string_view topic,
                             std::span<const std::uint8_t> payload) {
    if (topic.empty()) {
        throw Error("invalid-topic", "topic must be non-empty");
    }
    if (message_id.empty()) {
        throw Error("invalid-message", "message id must be non-empty");
    }
    std::lock_guard lock(mutex_);
    check_up_locked();
    if (state_.messages.contains(std::string(message_id))) {
        return;
    }
    maybe_crash_locked(FaultPoint::publish_before_append);
    QueueMessage msg{.message_id = std::string(message_id),
                     .topic = std::string(topic),
                     .payload = Bytes(payload.begin(), payload.end()),
                     .enqueued_at = options_.clock(),
                     .attempts = 0};
    const Json record{{"op", "PUB"}, {"message", msg.to_json()}};
    append_locked(record);
    apply(record, false);
    maybe_crash_locked(FaultPoint::publish_after_append);
}

void Broker::subscribe(std::string_view topic, std::string_view subscriber) {
    std::lock_guard lock(mutex_);
    check_up_locked();
    subscriber_locked(topic, subscriber, true);
}

std::optional<QueueMessage> Broker::fetch(std::string_view topic, std::string_view subscriber) {
    std::lock_guard lock(mutex_);
    check_up_locked();
    auto &sub = subscriber_locked(topic, subscriber, true);
    auto ids = state_.topics.find(std::string(topic));
    if (ids == state_.topics.end()) {
        return std::nullopt;
    }
    const auto now = options_.millis();
    for (const auto &id : ids->second) {
        if (sub.acked.contains(id)) {
            continue;
        }
        auto d = sub.deliveries.find(id);
        if (d != sub.deliveries.end() && d->second.in_flight && d->second.visible_at > now) {
            continue;
        }
        maybe_crash_locked(FaultPoint::fetch_before_append);
        const Json record{{"op", "DLV"}, {"topic", std::string(topic)}, {"subscriber", std::string(subscriber)},
                          {"messageId", id}};
        append_locked(record);
        apply(record, false);
        maybe_crash_locked(FaultPoint::fetch_after_append);
        auto msg = state_.messages.at(id);
        msg.attempts = sub.deliveries.at(id).attempts;
        return msg;
    }
    return std::nullopt;
}

void Broker::ack(std::string_view topic, std::string_view subscriber, std::string_view message_id) {
    std::lock_guard lock(mutex_);
    check_up_locked();
    if (!state_.messages.contains(std::string(message_id))) {
        throw Error("unknown-message", "no message " + std::string(message_id));
    }
    auto &sub = subscriber_locked(topic, subscriber, true);
    if (sub.acked.contains(std::string(message_id))) {
        return;
    }
    maybe_crash_locked(FaultPoint::ack_before_append);
    const Json record{{"op", "ACK"}, {"topic", std::string(topic)}, {"subscriber", std::string(subscriber)},
                      {"messageId", std::string(message_id)}};
    append_locked(record);
    apply(record, false);
    maybe_crash_locked(FaultPoint::ack_after_append);
}

void Broker::nack(std::string_view topic, std::string_view subscriber, std::string_view message_id) {
    std::lock_guard lock(mutex_);
    check_up_locked();
    auto &sub = subscriber_locked(topic, subscriber, true);
    auto d = sub.deliveries.find(std::string(message_id));
    if (d != sub.deliveries.end()) {
        d->second.in_flight = false;
        d->second.visible_at = 0;
    }
}

void Broker::set_fault_injector(std::function<bool(FaultPoint)> injector) {
    std::lock_guard lock(mutex_);
    injector_ = std::move(injector);
}

void Broker::restart() {
    std::lock_guard lock(mutex_);
    load_journal();
    crashed_ = false;
}

bool Broker::crashed() const {
    std::lock_guard lock(mutex_);
    return crashed_;
}

std::size_t Broker::message_count() const {
    std::lock_guard lock(mutex_);
    return state_.messages.size();
}

// BrokerServer ---------------------------------------------------------------

BrokerServer::BrokerServer(MessageQueue &queue, std::uint16_t port) : queue_(queue), listener_(port) {
    accept_thread_ = std::thread([this] {
        while (!stopping_) {
            auto sock = listener_.accept();
            if (!sock) {
                return;
            }
            std::lock_guard lock(mutex_);
            if (stopping_) {
                return;
            }
            open_fds_.push_back(sock->fd());
            workers_.emplace_back([this, s = std::move(*sock)]() mutable { serve(std::move(s)); });
        }
    });
}

BrokerServer::~BrokerServer() { stop(); }

void BrokerServer::stop() {
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
        for (int fd : open_fds_) {
            ::shutdown(fd, 2);
        }
        workers.swap(workers_);
    }
    for (auto &w : workers) {
        w.join();
    }
}

void BrokerServer::serve(net::Socket socket) {
    while (auto frame = socket.recv_frame()) {
        Json reply;
        try {
            const auto req = Json::parse(*frame);
            const auto verb = req.at("verb").get<std::string>();
            const auto topic = req.at("topic").get<std::string>();
            if (verb == "PUB") {
                const auto payload = base64url_decode(req.at("payload").get<std::string>());
                std::string id;
                if (req.contains("messageId") && req.at("messageId").is_string()) {
                    id = req.at("messageId").get<std::string>();
                    queue_.publish_with_id(id, topic, payload);
                } else {
                    id = queue_.publish(topic, payload);
                }
                reply = {{"ok", true}, {"messageId", id}};
            } else if (verb == "SUB") {
                const auto subscriber = req.at("subscriber").get<std::string>();
                queue_.subscribe(topic, subscriber);
                auto msg = queue_.fetch(topic, subscriber);
                reply = {{"ok", true}, {"message", msg ? msg->to_json() : Json(nullptr)}};
            } else if (verb == "ACK" || verb == "NACK") {
                const auto subscriber = req.at("subscriber").get<std::string>();
                const auto id = req.at("messageId").get<std::string>();
                if (verb == "ACK") {
                    queue_.ack(topic, subscriber, id);
                } else {
                    queue_.nack(topic, subscriber, id);
                }
                reply = {{"ok", true}};
            } else {
                reply = {{"ok", false}, {"code", "bad-verb"}, {"message", "unknown verb " + verb}};
            }
        } catch (const Error &e) {
            reply = {{"ok", false}, {"code", e.code()}, {"message", e.message()}};
        } catch (const std::exception &e) {
            reply = {{"ok", false}, {"code", "bad-request"}, {"message", e.what()}};
        }
        if (!socket.send_frame(canonical_json(reply))) {
            break;
        }
    }
}

// BrokerClient ---------------------------------------------------------------

BrokerClient::BrokerClient(const std::string &host, std::uint16_t port) : host_(host), port_(port) {}

Json BrokerClient::call(const Json &request) {
    std::lock_guard lock(mutex_);
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (!socket_.valid()) {
            try {
                socket_ = net::connect_tcp(host_, port_);
            } catch (const Error &e) {
                unavailable(e.what());
            }
        }
        if (socket_.send_frame(canonical_json(request))) {
            if (auto frame = socket_.recv_frame()) {
                const auto reply = Json::parse(*frame);
                if (!reply.at("ok").get<bool>()) {
                    throw Error(reply.at("code").get<std::string>(), reply.value("message", std::string{}));
                }
                return reply;
            }
        }
        socket_.close();
    }
    unavailable("connection to broker lost");
}

std::string BrokerClient::publish(std::string_view topic, std::span<const std::uint8_t> payload) {
    // Client-chosen ids make a retried PUB idempotent.
    auto id = crypto::random_id(16);
    publish_with_id(id, topic, payload);
    return id;
}

void BrokerClient::publish_with_id(std::string_view message_id, std::string_view topic,
                                   std::span<const std::uint8_t> payload) {
    call(Json{{"verb", "PUB"},
              {"topic", std::string(topic)},
              {"payload", base64url_encode(payload)},
              {"messageId", std::string(message_id)}});
}

void BrokerClient::subscribe(std::string_view, std::string_view) {
    // SUB both registers and fetches; registration happens on first fetch.
}

std::optional<QueueMessage> BrokerClient::fetch(std::string_view topic, std::string_view subscriber) {
    const auto reply =
        call(Json{{"verb", "SUB"}, {"topic", std::string(topic)}, {"subscriber", std::string(subscriber)}});
    if (reply.at("message").is_null()) {
        return std::nullopt;
    }
    return QueueMessage::from_json(reply.at("message"));
}

void BrokerClient::ack(std::string_view topic, std::string_view subscriber, std::string_view message_id) {
    call(Json{{"verb", "ACK"},
              {"topic", std::string(topic)},
              {"subscriber", std::string(subscriber)},
              {"messageId", std::string(message_id)}});
}

void BrokerClient::nack(std::string_view topic, std::string_view subscriber, std::string_view message_id) {
    call(Json{{"verb", "NACK"},
              {"topic", std::string(topic)},
              {"subscriber", std::string(subscriber)},
              {"messageId", std::string(message_id)}});
}

// Subscription ---------------------------------------------------------------

Subscription::Subscription(MessageQueue &queue, std::string topic, std::string subscriber, Handler handler)
    : queue_(queue), topic_(std::move(topic)), subscriber_(std::move(subscriber)), handler_(std::move(handler)) {}

Subscription::~Subscription() { stop(); }

bool Subscription::poll_once() {
    std::lock_guard lock(handler_mutex_);
    auto msg = queue_.fetch(topic_, subscriber_);
    if (!msg) {
        return false;
    }
    try {
        handler_(*msg);
    } catch (...) {
        queue_.nack(topic_, subscriber_, msg->message_id);
        return true;
    }
    queue_.ack(topic_, subscriber_, msg->message_id);
    return true;
}

std::size_t Subscription::drain() {
    std::size_t n = 0;
    while (poll_once()) {
        ++n;
    }
    return n;
}

void Subscription::start(std::chrono::milliseconds idle_sleep) {
    if (running_.exchange(true)) {
        return;
    }
    thread_ = std::thread([this, idle_sleep] {
        while (running_) {
            bool got = false;
            try {
                got = poll_once();
            } catch (const Error &) {
                got = false; // broker down; retry after the idle sleep
            }
            if (!got) {
                std::this_thread::sleep_for(idle_sleep);
            }
        }
    });
}

void Subscription::stop() {
    running_ = false;
    if (thread_.joinable()) {
        thread_.join();
    }
}

std::unique_ptr<Subscription> consume(MessageQueue &queue, std::string topic, std::string subscriber,
                                      Subscription::Handler handler) {
    queue.subscribe(topic, subscriber);
    return std::make_unique<Subscription>(queue, std::move(topic), std::move(subscriber), std::move(handler));
}

} // namespace resumevc::messaging
