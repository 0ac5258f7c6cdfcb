#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "properties.hpp"
#include "resumevc/error.hpp"
#include "resumevc/registry.hpp"

using namespace resumevc;
using fixtures::kEpoch;

namespace {

std::string code_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    return "";
}

did::DidDocument fresh_document(Timestamp now = kEpoch) {
    return did::build_did_document(did::new_ebsi_did(), {{"key-1", crypto::generate_key_pair().public_key()}}, now);
}

const std::string kType(credential::kResumeCredentialType);

} // namespace

TEST(Registry, RegisterResolveDeactivate) {
    ManualClock clock(kEpoch);
    registry::TrustRegistry reg(clock.clock());
    const auto doc = fresh_document();
    EXPECT_EQ(reg.register_did_document(doc), 1u);
    EXPECT_EQ(reg.resolve_did_document(doc.id), doc);
    EXPECT_EQ(code_of([&] { reg.register_did_document(doc); }), "already-registered");
    EXPECT_EQ(code_of([&] { reg.resolve_did_document(did::new_ebsi_did()); }), "not-found");
    EXPECT_EQ(code_of([&] {
                  reg.resolve_did_document(did::did_key_from_public_key(crypto::generate_key_pair().public_key()));
              }),
              "wrong-method");

    EXPECT_EQ(reg.deactivate_did_document(doc.id), 2u);
    EXPECT_TRUE(reg.resolve_did_document(doc.id).deactivated);
    EXPECT_EQ(code_of([&] { reg.deactivate_did_document(did::new_ebsi_did()); }), "not-found");
}

TEST(Registry, TirHistoryIsTimeAware) {
    ManualClock clock(kEpoch);
    registry::TrustRegistry reg(clock.clock());
    const auto doc = fresh_document();
    EXPECT_EQ(code_of([&] { reg.tir_register(doc.id, {kType}); }), "no-document");
    reg.register_did_document(doc);
    reg.tir_register(doc.id, {kType});
    EXPECT_EQ(code_of([&] { reg.tir_register(doc.id, {kType}); }), "already-trusted");
    EXPECT_TRUE(reg.tir_is_trusted_now(doc.id, kType));
    EXPECT_FALSE(reg.tir_is_trusted_now(doc.id, "OtherCredential"));
    EXPECT_FALSE(reg.tir_is_trusted(doc.id, kType, kEpoch - 1));

    clock.advance(100);
    const auto revoked = reg.tir_revoke(doc.id);
    EXPECT_EQ(revoked.revoked_at, kEpoch + 100);
    EXPECT_FALSE(reg.tir_is_trusted_now(doc.id, kType));
    EXPECT_TRUE(reg.tir_is_trusted(doc.id, kType, kEpoch + 50));
    EXPECT_EQ(code_of([&] { reg.tir_revoke(doc.id); }), "not-trusted");

    clock.advance(100);
    reg.tir_register(doc.id, {kType});
    EXPECT_TRUE(reg.tir_is_trusted_now(doc.id, kType));
    EXPECT_FALSE(reg.tir_is_trusted(doc.id, kType, kEpoch + 150));
    EXPECT_EQ(reg.tir_entry(doc.id)->registered_at, kEpoch + 200);
}

TEST(Registry, DeactivationRevokesTrust) {
    ManualClock clock(kEpoch);
    registry::TrustRegistry reg(clock.clock());
    const auto doc = fresh_document();
    reg.register_did_document(doc);
    reg.tir_register(doc.id, {kType});
    clock.advance(10);
    reg.deactivate_did_document(doc.id);
    EXPECT_FALSE(reg.tir_is_trusted_now(doc.id, kType));
    EXPECT_EQ(reg.tir_entry(doc.id)->revoked_at, kEpoch + 10);
    EXPECT_EQ(code_of([&] { reg.tir_register(doc.id, {kType}); }), "no-document");
    const auto events = reg.events();
    ASSERT_EQ(events.size(), 4u);
    EXPECT_EQ(events[2].kind, registry::EventKind::tir_revoked);
    EXPECT_EQ(events[3].kind, registry::EventKind::doc_deactivated);
}

TEST(Registry, EventLogIsGapFreeAndReplayable) {
    ManualClock clock(kEpoch);
    registry::TrustRegistry reg(clock.clock());
    for (int i = 0; i < 5; ++i) {
        reg.register_did_document(fresh_document());
    }
    const auto events = reg.events();
    for (std::size_t i = 0; i < events.size(); ++i) {
        EXPECT_EQ(events[i].sequence, i + 1);
        EXPECT_EQ(registry::RegistryEvent::from_json(events[i].to_json()), events[i]);
    }
    EXPECT_EQ(registry::TrustRegistry::replay(events)->state_json(), reg.state_json());

    auto gap = events;
    gap.erase(gap.begin() + 2);
    EXPECT_EQ(code_of([&] { registry::TrustRegistry::replay(gap); }), "corrupt-snapshot");
    auto dup = events;
    dup[1] = dup[0];
    dup[1].sequence = 2;
    EXPECT_EQ(code_of([&] { registry::TrustRegistry::replay(dup); }), "corrupt-snapshot");
}

TEST(Registry, DurableStoreSurvivesReopenAcrossSnapshots) {
    fixtures::TempDir dir;
    ManualClock clock(kEpoch);
    Json expected;
    std::vector<did::Did> ids;
    {
        registry::TrustRegistry reg(clock.clock(), dir.path());
        for (std::uint64_t i = 0; i < registry::TrustRegistry::kSnapshotInterval + 10; ++i) {
            const auto doc = fresh_document();
            reg.register_did_document(doc);
            ids.push_back(doc.id);
        }
        reg.tir_register(ids[3], {kType});
        expected = reg.state_json();
    }
    registry::TrustRegistry reopened(clock.clock(), dir.path());
    EXPECT_EQ(reopened.state_json(), expected);
    EXPECT_TRUE(reopened.tir_is_trusted_now(ids[3], kType));
    reopened.register_did_document(fresh_document());
    EXPECT_EQ(reopened.last_sequence(), registry::TrustRegistry::kSnapshotInterval + 12);
}

TEST(Registry, TornLogTailOrCorruptSnapshotIsReported) {
    fixtures::TempDir dir;
    ManualClock clock(kEpoch);
    {
        registry::TrustRegistry reg(clock.clock(), dir.path());
        reg.register_did_document(fresh_document());
        reg.snapshot(dir / "snap.json");
    }
    {
        std::ofstream out(dir / "snap.json", std::ios::trunc);
        out << "{\"state\":";
    }
    EXPECT_EQ(code_of([&] { registry::TrustRegistry::restore(dir / "snap.json", clock.clock()); }),
              "corrupt-snapshot");
    EXPECT_EQ(code_of([&] { registry::TrustRegistry::restore(dir / "missing.json", clock.clock()); }),
              "io-failure");
}

TEST(RegistryProperties, ReplayReproducesEveryAnswer) {
    const auto o = properties::registry_replay(100, 5, 10);
    EXPECT_TRUE(o.ok) << o.detail;
    EXPECT_EQ(o.cases, 100u);
}
