#include "resumevc/registry.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>

#include "resumevc/error.hpp"

namespace resumevc::registry {

namespace fs = std::filesystem;

namespace {

constexpr const char *kLogFile = "events.log";
constexpr const char *kSnapshotFile = "snapshot.json";

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io-failure", "cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file_atomically(const fs::path &path, const std::string &contents) {
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << contents) || !out.flush()) {
            throw Error("io-failure", "cannot write " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw Error("io-failure", "cannot rename snapshot: " + ec.message());
    }
}

struct ParsedSnapshot {
    Json state;
    std::vector<RegistryEvent> events;
};

ParsedSnapshot parse_snapshot(const std::string &text) {
    try {
        const auto json = Json::parse(text);
        ParsedSnapshot out{json.at("state"), {}};
        for (const auto &e : json.at("events")) {
            out.events.push_back(RegistryEvent::from_json(e));
        }
        return out;
    } catch (const Json::exception &e) {
        throw Error("corrupt-snapshot", e.what());
    } catch (const Error &e) {
        throw Error("corrupt-snapshot", e.what());
    }
}

} // namespace

// TirEntry -------------------------------------------------------------------

bool TirEntry::accredits(std::string_view credential_type) const {
    return std::find(accredited_for.begin(), accredited_for.end(), credential_type) != accredited_for.end();
}

bool TirEntry::trusted_at(std::string_view credential_type, Timestamp at) const {
    return accredits(credential_type) && registered_at <= at && (!revoked_at || *revoked_at > at);
}

Json TirEntry::to_json() const {
    Json j{{"did", did.str()}, {"accreditedFor", accredited_for}, {"registeredAt", registered_at}};
    j["revokedAt"] = revoked_at ? Json(*revoked_at) : Json(nullptr);
    return j;
}

TirEntry TirEntry::from_json(const Json &json) {
    try {
        TirEntry e{.did = did::Did::parse(json.at("did").get<std::string>()),
                   .accredited_for = json.at("accreditedFor").get<std::vector<std::string>>(),
                   .registered_at = json.at("registeredAt").get<Timestamp>(),
                   .revoked_at = std::nullopt};
        if (json.contains("revokedAt") && !json.at("revokedAt").is_null()) {
            e.revoked_at = json.at("revokedAt").get<Timestamp>();
        }
        return e;
    } catch (const Json::exception &e) {
        throw Error("invalid-entry", e.what());
    }
}

// Events ---------------------------------------------------------------------

std::string_view event_kind_name(EventKind kind) {
    switch (kind) {
    case EventKind::doc_registered:
        return "doc-registered";
    case EventKind::doc_deactivated:
        return "doc-deactivated";
    case EventKind::tir_registered:
        return "tir-registered";
    case EventKind::tir_revoked:
        return "tir-revoked";
    }
    return "unknown";
}

EventKind event_kind_from_name(std::string_view name) {
    for (auto k : {EventKind::doc_registered, EventKind::doc_deactivated, EventKind::tir_registered,
                   EventKind::tir_revoked}) {
        if (event_kind_name(k) == name) {
            return k;
        }
    }
    throw Error("invalid-event", "unknown event kind '" + std::string(name) + "'");
}

Json RegistryEvent::to_json() const {
    return Json{{"sequence", sequence}, {"kind", std::string(event_kind_name(kind))}, {"payload", payload}, {"at", at}};
}

RegistryEvent RegistryEvent::from_json(const Json &json) {
    try {
        return RegistryEvent{.sequence = json.at("sequence").get<std::uint64_t>(),
                             .kind = event_kind_from_name(json.at("kind").get<std::string>()),
                             .payload = json.at("payload"),
                             .at = json.at("at").get<Timestamp>()};
    } catch (const Json::exception &e) {
        throw Error("invalid-event", e.what());
    }
}

// TrustRegistry --------------------------------------------------------------

TrustRegistry::TrustRegistry(Clock clock) : clock_(std::move(clock)) {}

TrustRegistry::TrustRegistry(Clock clock, const fs::path &data_dir) : clock_(std::move(clock)), data_dir_(data_dir) {
    std::error_code ec;
    fs::create_directories(data_dir, ec);
    if (ec) {
        throw Error("io-failure", "cannot create " + data_dir.string() + ": " + ec.message());
    }
    load_data_dir();
    log_file_.open(data_dir / kLogFile, std::ios::binary | std::ios::app);
    if (!log_file_) {
        throw Error("io-failure", "cannot open event log in " + data_dir.string());
    }
}

void TrustRegistry::load_data_dir() {
    const auto snap_path = *data_dir_ / kSnapshotFile;
    if (fs::exists(snap_path)) {
        auto parsed = parse_snapshot(read_file(snap_path));
        auto rebuilt = replay(parsed.events, clock_);
        if (rebuilt->state_json() != parsed.state) {
            throw Error("corrupt-snapshot", "snapshot state disagrees with its event log");
        }
        state_ = std::move(rebuilt->state_);
    }
    const auto log_path = *data_dir_ / kLogFile;
    if (!fs::exists(log_path)) {
        return;
    }
    const auto text = read_file(log_path);
    std::size_t pos = 0;
    std::size_t complete_bytes = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            break; // torn trailing write: the event was never acknowledged
        }
        const auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        complete_bytes = pos;
        if (line.empty()) {
            continue;
        }
        RegistryEvent event;
        try {
            event = RegistryEvent::from_json(Json::parse(line));
        } catch (const std::exception &e) {
            throw Error("corrupt-snapshot", std::string("bad event log line: ") + e.what());
        }
        if (event.sequence <= state_.log.size()) {
            continue; // already covered by the snapshot
        }
        if (event.sequence != state_.log.size() + 1) {
            throw Error("corrupt-snapshot", "event log has a sequence gap");
        }
        try {
            apply(state_, event);
        } catch (const Error &e) {
            throw Error("corrupt-snapshot", e.what());
        }
    }
    if (complete_bytes < text.size()) {
        fs::resize_file(log_path, complete_bytes);
    }
}

std::uint64_t TrustRegistry::append_locked(EventKind kind, Json payload, Timestamp at) {
    RegistryEvent event{.sequence = state_.log.size() + 1, .kind = kind, .payload = std::move(payload), .at = at};
    if (data_dir_) {
        log_file_ << canonical_json(event.to_json()) << '\n';
        log_file_.flush();
        if (!log_file_) {
            throw Error("io-failure", "event log write failed");
        }
    }
    apply(state_, event);
    if (data_dir_ && event.sequence % kSnapshotInterval == 0) {
        write_snapshot_locked();
    }
    return event.sequence;
}

void TrustRegistry::apply(State &state, const RegistryEvent &event) {
    switch (event.kind) {
    case EventKind::doc_registered: {
        auto doc = did::DidDocument::from_json(event.payload.at("document"));
        if (!state.documents.emplace(doc.id, doc).second) {
            throw Error("already-registered", doc.id.str());
        }
        break;
    }
    case EventKind::doc_deactivated: {
        const auto id = did::Did::parse(event.payload.at("did").get<std::string>());
        auto it = state.documents.find(id);
        if (it == state.documents.end()) {
            throw Error("not-found", id.str());
        }
        it->second.deactivated = true;
        break;
    }
    case EventKind::tir_registered: {
        auto entry = TirEntry::from_json(event.payload.at("entry"));
        state.tir[entry.did].push_back(std::move(entry));
        break;
    }
    case EventKind::tir_revoked: {
        const auto id = did::Did::parse(event.payload.at("did").get<std::string>());
        auto it = state.tir.find(id);
        if (it == state.tir.end() || it->second.empty() || it->second.back().revoked_at) {
            throw Error("not-trusted", id.str());
        }
        it->second.back().revoked_at = event.payload.at("revokedAt").get<Timestamp>();
        break;
    }
    }
    state.log.push_back(event);
}

std::uint64_t TrustRegistry::register_did_document(const did::DidDocument &doc) {
    did::validate_document(doc);
    if (doc.deactivated) {
        throw Error("invalid-document", "cannot register a deactivated document");
    }
    std::unique_lock lock(mutex_);
    if (state_.documents.contains(doc.id)) {
        throw Error("already-registered", doc.id.str() + " already has a document");
    }
    return append_locked(EventKind::doc_registered, Json{{"document", doc.to_json()}}, clock_());
}

std::uint64_t TrustRegistry::deactivate_did_document(const did::Did &did) {
    std::unique_lock lock(mutex_);
    auto it = state_.documents.find(did);
    if (it == state_.documents.end()) {
        throw Error("not-found", did.str());
    }
    if (it->second.deactivated) {
        return state_.log.back().sequence;
    }
    const auto now = clock_();
    auto tir = state_.tir.find(did);
    if (tir != state_.tir.end() && !tir->second.empty() && !tir->second.back().revoked_at) {
        append_locked(EventKind::tir_revoked, Json{{"did", did.str()}, {"revokedAt", now}}, now);
    }
    return append_locked(EventKind::doc_deactivated, Json{{"did", did.str()}}, now);
}

did::DidDocument TrustRegistry::resolve_did_document(const did::Did &did) const {
    if (did.method() != did::Method::ebsi) {
        throw Error("wrong-method", did.str() + " is not resolvable on the ledger");
    }
    std::shared_lock lock(mutex_);
    auto it = state_.documents.find(did);
    if (it == state_.documents.end()) {
        throw Error("not-found", did.str());
    }
    return it->second;
}

TirEntry TrustRegistry::tir_register(const did::Did &did, std::vector<std::string> accredited_for) {
    std::unique_lock lock(mutex_);
    auto doc = state_.documents.find(did);
    if (doc == state_.documents.end() || doc->second.deactivated) {
        throw Error("no-document", did.str() + " has no active DID document");
    }
    auto tir = state_.tir.find(did);
    if (tir != state_.tir.end() && !tir->second.empty() && !tir->second.back().revoked_at) {
        throw Error("already-trusted", did.str());
    }
    TirEntry entry{.did = did, .accredited_for = std::move(accredited_for), .registered_at = clock_(), .revoked_at = {}};
    append_locked(EventKind::tir_registered, Json{{"entry", entry.to_json()}}, entry.registered_at);
    return entry;
}

TirEntry TrustRegistry::tir_revoke(const did::Did &did) {
    std::unique_lock lock(mutex_);
    auto tir = state_.tir.find(did);
    if (tir == state_.tir.end() || tir->second.empty() || tir->second.back().revoked_at) {
        throw Error("not-trusted", did.str() + " is not a trusted issuer");
    }
    const auto now = clock_();
    append_locked(EventKind::tir_revoked, Json{{"did", did.str()}, {"revokedAt", now}}, now);
    return state_.tir.at(did).back();
}

bool TrustRegistry::tir_is_trusted(const did::Did &did, std::string_view credential_type, Timestamp at) const {
    std::shared_lock lock(mutex_);
    auto tir = state_.tir.find(did);
    if (tir == state_.tir.end()) {
        return false;
    }
    return std::any_of(tir->second.begin(), tir->second.end(),
                       [&](const TirEntry &e) { return e.trusted_at(credential_type, at); });
}

bool TrustRegistry::tir_is_trusted_now(const did::Did &did, std::string_view credential_type) const {
    return tir_is_trusted(did, credential_type, clock_());
}

std::optional<TirEntry> TrustRegistry::tir_entry(const did::Did &did) const {
    std::shared_lock lock(mutex_);
    auto tir = state_.tir.find(did);
    if (tir == state_.tir.end() || tir->second.empty()) {
        return std::nullopt;
    }
    return tir->second.back();
}

std::vector<RegistryEvent> TrustRegistry::events() const {
    std::shared_lock lock(mutex_);
    return state_.log;
}

std::uint64_t TrustRegistry::last_sequence() const {
    std::shared_lock lock(mutex_);
    return state_.log.size();
}

Json TrustRegistry::state_json(const State &state) {
    Json docs = Json::object();
    for (const auto &[id, doc] : state.documents) {
        docs[id.str()] = doc.to_json();
    }
    Json tir = Json::object();
    for (const auto &[id, entries] : state.tir) {
        Json list = Json::array();
        for (const auto &e : entries) {
            list.push_back(e.to_json());
        }
        tir[id.str()] = list;
    }
    return Json{{"documents", docs}, {"tir", tir}};
}

Json TrustRegistry::state_json() const {
    std::shared_lock lock(mutex_);
    return state_json(state_);
}

void TrustRegistry::write_snapshot_locked() const {
    Json events = Json::array();
    for (const auto &e : state_.log) {
        events.push_back(e.to_json());
    }
    write_file_atomically(*data_dir_ / kSnapshotFile,
                          canonical_json(Json{{"state", state_json(state_)}, {"events", events}}));
}

void TrustRegistry::snapshot(const fs::path &path) const {
    std::shared_lock lock(mutex_);
    Json events = Json::array();
    for (const auto &e : state_.log) {
        events.push_back(e.to_json());
    }
    write_file_atomically(path, canonical_json(Json{{"state", state_json(state_)}, {"events", events}}));
}

std::unique_ptr<TrustRegistry> TrustRegistry::restore(const fs::path &path, Clock clock) {
    auto parsed = parse_snapshot(read_file(path));
    auto registry = replay(parsed.events, std::move(clock));
    if (registry->state_json() != parsed.state) {
        throw Error("corrupt-snapshot", "snapshot state disagrees with its event log");
    }
    return registry;
}

std::unique_ptr<TrustRegistry> TrustRegistry::replay(const std::vector<RegistryEvent> &events, Clock clock) {
    auto registry = std::make_unique<TrustRegistry>(std::move(clock));
    for (const auto &event : events) {
        if (event.sequence != registry->state_.log.size() + 1) {
            throw Error("corrupt-snapshot", "event log is not gap-free");
        }
        try {
            apply(registry->state_, event);
        } catch (const Json::exception &e) {
            throw Error("corrupt-snapshot", e.what());
        } catch (const Error &e) {
            throw Error("corrupt-snapshot", e.what());
        }
    }
    return registry;
}

} // namespace resumevc::registry
