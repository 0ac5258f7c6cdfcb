#include <benchmark/benchmark.h>

#include <filesystem>

#include "resumevc/broker.hpp"
#include "resumevc/crypto.hpp"
#include "resumevc/did.hpp"
#include "resumevc/registry.hpp"

using namespace resumevc;

static void BM_Sign(benchmark::State &state) {
    const auto key = crypto::generate_key_pair();
    const auto message = to_bytes(std::string(256, 'x'));
    for (auto _ : state) {
        benchmark::DoNotOptimize(crypto::sign_message(message, key));
    }
}
BENCHMARK(BM_Sign);

static void BM_Verify(benchmark::State &state) {
    const auto key = crypto::generate_key_pair();
    const auto message = to_bytes(std::string(256, 'x'));
    const auto sig = crypto::sign_message(message, key);
    for (auto _ : state) {
        benchmark::DoNotOptimize(crypto::verify_message(message, sig, key.public_key()));
    }
}
BENCHMARK(BM_Verify);

static void BM_EnvelopeRoundTrip(benchmark::State &state) {
    const auto key = crypto::generate_key_pair();
    const auto plaintext = to_bytes(std::string(static_cast<std::size_t>(state.range(0)), 'x'));
    for (auto _ : state) {
        const auto env = crypto::ecdh_encrypt(plaintext, key.public_key(), "did:ebsi:zVerifier#enc-1");
        benchmark::DoNotOptimize(crypto::ecdh_decrypt(env, key));
    }
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnvelopeRoundTrip)->Arg(1024)->Arg(16 * 1024);

static void BM_DidKeyDeriveResolve(benchmark::State &state) {
    const auto key = crypto::generate_key_pair();
    for (auto _ : state) {
        const auto d = did::did_key_from_public_key(key.public_key());
        benchmark::DoNotOptimize(did::resolve_did_key(d));
    }
}
BENCHMARK(BM_DidKeyDeriveResolve);

static void BM_RegistryReplay(benchmark::State &state) {
    registry::TrustRegistry reg;
    for (int i = 0; i < state.range(0); ++i) {
        const auto id = did::new_ebsi_did();
        reg.register_did_document(
            did::build_did_document(id, {{"key-1", crypto::generate_key_pair().public_key()}}, 0));
        reg.tir_register(id, {"ResumeCredential"});
    }
    const auto events = reg.events();
    for (auto _ : state) {
        benchmark::DoNotOptimize(registry::TrustRegistry::replay(events));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(events.size()));
}
BENCHMARK(BM_RegistryReplay)->Arg(100)->Arg(1000);

static void BM_BrokerPublishFetchAck(benchmark::State &state) {
    const auto dir = std::filesystem::temp_directory_path() / "resumevc-bench-broker";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        messaging::Broker broker(messaging::BrokerOptions{.log_path = dir / "broker.log"});
        const auto payload = to_bytes(std::string(512, 'p'));
        for (auto _ : state) {
            broker.publish("bench", payload);
            const auto m = broker.fetch("bench", "consumer");
            broker.ack("bench", "consumer", m->message_id);
        }
    }
    std::filesystem::remove_all(dir);
}
BENCHMARK(BM_BrokerPublishFetchAck);

BENCHMARK_MAIN();
