#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "resumevc/clock.hpp"
#include "resumevc/did.hpp"
#include "resumevc/encoding.hpp"

namespace resumevc::registry {

struct TirEntry {
    did::Did did;
    std::vector<std::string> accredited_for;
    Timestamp registered_at = 0;
    std::optional<Timestamp> revoked_at;

    bool accredits(std::string_view credential_type) const;
    bool trusted_at(std::string_view credential_type, Timestamp at) const;

    Json to_json() const;
    static TirEntry from_json(const Json &json);

    bool operator==(const TirEntry &) const = default;
};

enum class EventKind { doc_registered, doc_deactivated, tir_registered, tir_revoked };

std::string_view event_kind_name(EventKind kind);
EventKind event_kind_from_name(std::string_view name);

struct RegistryEvent {
    std::uint64_t sequence = 0;
    EventKind kind = EventKind::doc_registered;
    Json payload;
    Timestamp at = 0;

    Json to_json() const;
    static RegistryEvent from_json(const Json &json);

    bool operator==(const RegistryEvent &) const = default;
};

/// Read side of the ledger, as seen by wallets and verifiers. Implemented by
/// TrustRegistry in-process and by HttpRegistryClient over the wire.
class RegistryReader {
  public:
    virtual ~RegistryReader() = default;

    /// Throws Error("not-found") or Error("wrong-method").
    virtual did::DidDocument resolve_did_document(const did::Did &did) const = 0;
    virtual bool tir_is_trusted(const did::Did &did, std::string_view credential_type, Timestamp at) const = 0;
};

/// Ledger simulator: DID-document store plus Trusted Issuer Registry, both
/// derived from an append-only event log. When constructed with a data
/// directory every event is appended to `events.log` before the call returns
/// and a full snapshot is rewritten every `kSnapshotInterval` events.
class TrustRegistry final : public RegistryReader {
  public:
    static constexpr std::uint64_t kSnapshotInterval = 64;

    explicit TrustRegistry(Clock clock = system_clock());
    /// Opens (or creates) a durable registry. Throws Error("io-failure") or
    /// Error("corrupt-snapshot").
    TrustRegistry(Clock clock, const std::filesystem::path &data_dir);

    TrustRegistry(const TrustRegistry &) = delete;
    TrustRegistry &operator=(const TrustRegistry &) = delete;

    /// Returns the event sequence number. Throws Error("already-registered") or
    /// Error("invalid-document").
    std::uint64_t register_did_document(const did::DidDocument &doc);
    /// Marks the document deactivated and revokes any live TIR entry first.
    /// Throws Error("not-found").
    std::uint64_t deactivate_did_document(const did::Did &did);

    did::DidDocument resolve_did_document(const did::Did &did) const override;

    /// Throws Error("no-document") or Error("already-trusted").
    TirEntry tir_register(const did::Did &did, std::vector<std::string> accredited_for);
    /// Throws Error("not-trusted").
    TirEntry tir_revoke(const did::Did &did);
    bool tir_is_trusted(const did::Did &did, std::string_view credential_type, Timestamp at) const override;
    bool tir_is_trusted_now(const did::Did &did, std::string_view credential_type) const;
    /// Most recent entry for the DID, live or revoked.
    std::optional<TirEntry> tir_entry(const did::Did &did) const;

    std::vector<RegistryEvent> events() const;
    std::uint64_t last_sequence() const;

    /// Documents and TIR history, canonical form. Two registries answer every
    /// query identically iff their state_json() are equal.
    Json state_json() const;

    /// Writes {state, events} to `path`. Throws Error("io-failure").
    void snapshot(const std::filesystem::path &path) const;
    /// Throws Error("io-failure") or Error("corrupt-snapshot").
    static std::unique_ptr<TrustRegistry> restore(const std::filesystem::path &path, Clock clock = system_clock());
    /// Rebuilds state from an event log. Throws Error("corrupt-snapshot") if
    /// the log is not gap-free or an event does not apply.
    static std::unique_ptr<TrustRegistry> replay(const std::vector<RegistryEvent> &events,
                                                 Clock clock = system_clock());

  private:
    struct State {
        std::map<did::Did, did::DidDocument> documents;
        std::map<did::Did, std::vector<TirEntry>> tir;
        std::vector<RegistryEvent> log;
    };

    std::uint64_t append_locked(EventKind kind, Json payload, Timestamp at);
    static void apply(State &state, const RegistryEvent &event);
    static Json state_json(const State &state);
    void load_data_dir();
    void write_snapshot_locked() const;

    Clock clock_;
    std::optional<std::filesystem::path> data_dir_;
    std::ofstream log_file_;
    mutable std::shared_mutex mutex_;
    State state_;
};

} // namespace resumevc::registry
