#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <fstream>
#include <sstream>

namespace fixtures {

namespace fs = std::filesystem;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("resumevc-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

credential::Position sample_position(int index) {
    credential::Position p;
    p.kind = index % 2 == 0 ? credential::PositionKind::work : credential::PositionKind::education;
    p.title = "Role " + std::to_string(index);
    p.organization = "Organization " + std::to_string(index);
    p.start = "201" + std::to_string(index % 10) + "-01-15";
    p.end = "201" + std::to_string(index % 10) + "-12-31";
    p.description = "Position number " + std::to_string(index);
    return p;
}

credential::Resume sample_resume(const did::Did &holder, int positions) {
    credential::Resume r{holder, "Alice Example", {}};
    for (int i = 0; i < positions; ++i) {
        r.positions.push_back(sample_position(i));
    }
    return r;
}

const Json &vectors() {
    static const Json v = [] {
        std::ifstream in(RESUMEVC_VECTORS);
        std::stringstream buf;
        buf << in.rdbuf();
        return Json::parse(buf.str());
    }();
    return v;
}

Ecosystem::Ecosystem()
    : issuer_did(did::new_ebsi_did()), issuer_key(crypto::generate_key_pair()), verifier_did(did::new_ebsi_did()),
      verifier_key(crypto::generate_key_pair()) {
    registry.register_did_document(did::build_did_document(issuer_did, {{"key-1", issuer_key.public_key()}}, kEpoch));
    registry.tir_register(issuer_did, {std::string(credential::kResumeCredentialType)});
    registry.register_did_document(did::build_did_document(
        verifier_did, {{std::string(verification::kEncryptionKeyId), verifier_key.public_key()}}, kEpoch));
    issuer = std::make_unique<issuance::IssuerService>(
        issuance::IssuerConfig{.issuer_did = issuer_did, .signing_key = issuer_key}, clock.clock());
    verifier = std::make_unique<verification::VerifierService>(
        verification::VerifierConfig{.verifier_did = verifier_did, .encryption_key = verifier_key}, registry,
        clock.clock());
}

wallet::Wallet Ecosystem::make_wallet(const fs::path &path) {
    auto w = wallet::Wallet::init(path, clock.clock());
    const auto id = w.create_resume("Alice Example");
    w.add_position(id, sample_position(0));
    w.add_position(id, sample_position(1));
    return w;
}

wallet::Wallet Ecosystem::make_holder(const fs::path &path) {
    auto w = make_wallet(path);
    w.acquire_credential(*issuer, registry, "resume-1");
    return w;
}

} // namespace fixtures
