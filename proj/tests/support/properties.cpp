#include "properties.hpp"

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "p256_oracle.hpp"
#include "resumevc/broker.hpp"
#include "resumevc/error.hpp"
#include "resumevc/realtime.hpp"

namespace properties {

using namespace resumevc;

namespace {

crypto::KeyPair random_key(std::mt19937_64 &rng) {
    for (;;) {
        std::array<std::uint8_t, 32> scalar{};
        for (std::size_t i = 0; i < scalar.size(); i += 8) {
            const auto word = rng();
            for (std::size_t j = 0; j < 8; ++j) {
                scalar[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
            }
        }
        try {
            return crypto::KeyPair::from_private_scalar(scalar);
        } catch (const Error &) {
        }
    }
}

Bytes random_bytes(std::mt19937_64 &rng, std::size_t max_len) {
    Bytes out(std::uniform_int_distribution<std::size_t>(0, max_len)(rng));
    for (auto &b : out) {
        b = static_cast<std::uint8_t>(rng());
    }
    return out;
}

Outcome fail(Outcome o, std::string detail) {
    o.ok = false;
    o.detail = std::move(detail);
    return o;
}

crypto::KeyPair key_from_hex(const std::string &hex) { return crypto::KeyPair::from_private_scalar(hex_decode(hex)); }

const did::Did &vector_verifier() {
    static const did::Did d = did::Did::parse("did:ebsi:zVerifier");
    return d;
}

} // namespace

Outcome sign_verify_roundtrip(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Outcome o;
    for (; o.cases < cases; ++o.cases) {
        const auto key = random_key(rng);
        auto message = random_bytes(rng, 256);
        const auto sig = crypto::sign_message(message, key);
        if (!crypto::verify_message(message, sig, key.public_key())) {
            return fail(o, "valid signature rejected at case " + std::to_string(o.cases));
        }
        message.push_back(0x00);
        if (crypto::verify_message(message, sig, key.public_key())) {
            return fail(o, "extended message accepted at case " + std::to_string(o.cases));
        }
        const auto token = crypto::sign_token(Json{{"case", o.cases}, {"data", base64url_encode(message)}},
                                              Json{{"kid", "k"}}, key);
        try {
            crypto::verify_token(crypto::CompactToken::parse(token.serialize()), key.public_key());
        } catch (const Error &e) {
            return fail(o, "token round-trip failed at case " + std::to_string(o.cases) + ": " + e.what());
        }
    }
    return o;
}

Outcome ecdh_roundtrip(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Outcome o;
    for (; o.cases < cases; ++o.cases) {
        const auto recipient = random_key(rng);
        const auto stranger = random_key(rng);
        const auto plaintext = random_bytes(rng, 1024);
        const auto env = crypto::ecdh_encrypt(plaintext, recipient.public_key(), "did:ebsi:zVerifier#enc-1");
        try {
            if (crypto::ecdh_decrypt(crypto::EncryptedEnvelope::parse(env.serialize()), recipient) != plaintext) {
                return fail(o, "plaintext changed at case " + std::to_string(o.cases));
            }
        } catch (const Error &e) {
            return fail(o, "round-trip failed at case " + std::to_string(o.cases) + ": " + e.what());
        }
        try {
            crypto::ecdh_decrypt(env, stranger);
            return fail(o, "wrong key decrypted at case " + std::to_string(o.cases));
        } catch (const Error &) {
        }
    }
    return o;
}

Outcome token_mutations() {
    const auto &v = fixtures::vectors().at("token");
    const auto wire = v.at("serialized").get<std::string>();
    const auto key = key_from_hex(v.at("scalar").get<std::string>());
    Outcome o;
    crypto::verify_token(crypto::CompactToken::parse(wire), key.public_key());
    for (std::size_t pos = 0; pos < wire.size(); ++pos) {
        for (int value = 0; value < 256; ++value) {
            if (static_cast<unsigned char>(wire[pos]) == value) {
                continue;
            }
            auto mutated = wire;
            mutated[pos] = static_cast<char>(value);
            ++o.cases;
            try {
                crypto::verify_token(crypto::CompactToken::parse(mutated), key.public_key());
                return fail(o, "mutation accepted at offset " + std::to_string(pos) + " value " +
                                   std::to_string(value));
            } catch (const Error &) {
            }
        }
    }
    return o;
}

Outcome envelope_mutations() {
    const auto &v = fixtures::vectors().at("envelope");
    const auto key = key_from_hex(v.at("recipientScalar").get<std::string>());
    const auto plaintext = to_bytes(v.at("plaintext").get<std::string>());
    const auto &wire = v.at("wire");
    Outcome o;
    if (crypto::ecdh_decrypt(crypto::EncryptedEnvelope::from_json(wire), key) != plaintext) {
        return fail(o, "frozen envelope does not decrypt");
    }
    for (const std::string field : {"epk", "iv", "ciphertext", "tag", "kid"}) {
        const bool text = field == "kid";
        const auto original = text ? to_bytes(wire.at(field).get<std::string>())
                                   : base64url_decode(wire.at(field).get<std::string>());
        for (std::size_t pos = 0; pos < original.size(); ++pos) {
            for (int bit = 0; bit < 8; ++bit) {
                auto bytes = original;
                bytes[pos] ^= static_cast<std::uint8_t>(1u << bit);
                auto json = wire;
                json[field] = text ? to_string(bytes) : base64url_encode(bytes);
                ++o.cases;
                try {
                    crypto::ecdh_decrypt(crypto::EncryptedEnvelope::from_json(json), key);
                    return fail(o, "mutation accepted in " + field + " at byte " + std::to_string(pos));
                } catch (const std::exception &) {
                }
            }
        }
    }
    return o;
}

Outcome pinned_vectors() {
    const auto &v = fixtures::vectors();
    Outcome o;
    for (const auto &entry : v.at("keys")) {
        ++o.cases;
        const auto key = key_from_hex(entry.at("scalar").get<std::string>());
        const auto label = entry.at("scalar").get<std::string>().substr(0, 8);
        if (hex_encode(key.public_key().point_bytes()) != entry.at("compressed").get<std::string>()) {
            return fail(o, "compressed point differs for scalar " + label);
        }
        if (did::did_key_from_public_key(key.public_key()).str() != entry.at("didKey").get<std::string>()) {
            return fail(o, "did:key differs for scalar " + label);
        }
        const auto message = to_bytes(entry.at("message").get<std::string>());
        if (hex_encode(crypto::sign_message(message, key)) != entry.at("signature").get<std::string>()) {
            return fail(o, "deterministic signature differs for scalar " + label);
        }
        const auto sample = to_bytes("sample");
        const auto reference = entry.at("signatureSample").get<std::string>();
        if (!crypto::verify_message(sample, hex_decode(reference), key.public_key()) ||
            hex_encode(crypto::sign_message(sample, key)) != reference) {
            return fail(o, "signature over 'sample' differs for scalar " + label);
        }
    }

    ++o.cases;
    const auto &t = v.at("token");
    const auto holder = key_from_hex(t.at("scalar").get<std::string>());
    Json extras = t.at("header");
    extras.erase("alg");
    const auto token = crypto::sign_token(t.at("claims"), extras, holder);
    if (token.serialize() != t.at("serialized").get<std::string>()) {
        return fail(o, "token serialization differs from the reference");
    }

    ++o.cases;
    const auto &e = v.at("envelope");
    const auto recipient = key_from_hex(e.at("recipientScalar").get<std::string>());
    const auto env = crypto::EncryptedEnvelope::from_json(e.at("wire"));
    if (env.recipient_key_id != e.at("kid").get<std::string>() ||
        to_string(crypto::ecdh_decrypt(env, recipient)) != e.at("plaintext").get<std::string>()) {
        return fail(o, "reference envelope does not decrypt to the reference plaintext");
    }
    if (env.recipient_key_id != vector_verifier().str() + "#enc-1") {
        return fail(o, "reference envelope kid is not the verifier encryption key");
    }
    return o;
}

Outcome oracle_agreement(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Outcome o;
    for (; o.cases < cases; ++o.cases) {
        const auto key = random_key(rng);
        const auto expected = oracle::p256_public_key(std::span<const std::uint8_t, 32>(key.private_scalar()));
        if (!std::equal(expected.begin(), expected.end(), key.public_key().point_bytes().begin())) {
            return fail(o, "public key differs from the reference at case " + std::to_string(o.cases));
        }
        if (!oracle::p256_on_curve(std::span<const std::uint8_t, 33>(key.public_key().point_bytes()))) {
            return fail(o, "public key off the curve at case " + std::to_string(o.cases));
        }
    }
    return o;
}

Outcome did_key_bijection(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Outcome o;
    std::set<std::string> seen;
    for (; o.cases < cases; ++o.cases) {
        const auto key = random_key(rng);
        const auto d = did::did_key_from_public_key(key.public_key());
        const auto reparsed = did::Did::parse(d.str());
        if (reparsed != d || did::resolve_did_key(reparsed) != key.public_key()) {
            return fail(o, "derive -> resolve is not the identity for " + d.str());
        }
        if (did::did_key_from_public_key(did::resolve_did_key(d)) != d) {
            return fail(o, "resolve -> derive is not the identity for " + d.str());
        }
        if (!seen.insert(d.str()).second) {
            return fail(o, "two keys mapped to " + d.str());
        }
    }
    return o;
}

namespace {

const std::vector<std::string> kTypes = {std::string(credential::kResumeCredentialType), "DiplomaCredential"};

Json registry_answers(const registry::TrustRegistry &reg, const std::vector<did::Did> &dids,
                      const std::set<Timestamp> &times) {
    Json answers = Json::object();
    answers["state"] = reg.state_json();
    answers["lastSequence"] = reg.last_sequence();
    Json events = Json::array();
    for (const auto &e : reg.events()) {
        events.push_back(e.to_json());
    }
    answers["events"] = events;
    for (const auto &d : dids) {
        Json q = Json::object();
        try {
            q["resolve"] = reg.resolve_did_document(d).to_json();
        } catch (const Error &e) {
            q["resolve"] = e.code();
        }
        const auto entry = reg.tir_entry(d);
        q["entry"] = entry ? entry->to_json() : Json();
        std::string trusted;
        for (const auto t : times) {
            for (const auto &type : kTypes) {
                trusted.push_back(reg.tir_is_trusted(d, type, t) ? '1' : '0');
            }
        }
        q["trusted"] = trusted;
        answers[d.str()] = q;
    }
    return answers;
}

} // namespace

Outcome registry_replay(std::size_t sequences, std::uint64_t seed, std::size_t durable_every) {
    std::mt19937_64 rng(seed);
    Outcome o;
    for (; o.cases < sequences; ++o.cases) {
        const bool durable = durable_every > 0 && o.cases % durable_every == 0;
        fixtures::TempDir dir;
        ManualClock clock(fixtures::kEpoch);
        std::vector<did::Did> dids;
        for (int i = 0; i < 5; ++i) {
            dids.push_back(did::new_ebsi_did());
        }
        std::set<Timestamp> times{fixtures::kEpoch - 1};
        auto reg = durable ? std::make_unique<registry::TrustRegistry>(clock.clock(), dir / "registry")
                           : std::make_unique<registry::TrustRegistry>(clock.clock());
        const auto ops = std::uniform_int_distribution<int>(10, 60)(rng);
        for (int i = 0; i < ops; ++i) {
            const auto &d = dids[rng() % dids.size()];
            try {
                switch (rng() % 5) {
                case 0:
                    reg->register_did_document(
                        did::build_did_document(d, {{"key-1", random_key(rng).public_key()}}, clock.now()));
                    break;
                case 1:
                    reg->deactivate_did_document(d);
                    break;
                case 2: {
                    std::vector<std::string> types;
                    const auto mask = 1 + rng() % 3;
                    for (std::size_t t = 0; t < kTypes.size(); ++t) {
                        if (mask & (1u << t)) {
                            types.push_back(kTypes[t]);
                        }
                    }
                    reg->tir_register(d, types);
                    break;
                }
                case 3:
                    reg->tir_revoke(d);
                    break;
                default:
                    clock.advance(1 + static_cast<std::int64_t>(rng() % 1000));
                }
            } catch (const Error &) {
            }
            times.insert(clock.now() - 1);
            times.insert(clock.now());
        }
        times.insert(clock.now() + 1);

        const auto expected = registry_answers(*reg, dids, times);
        const auto replayed = registry::TrustRegistry::replay(reg->events(), clock.clock());
        if (registry_answers(*replayed, dids, times) != expected) {
            return fail(o, "replayed registry disagrees at sequence " + std::to_string(o.cases));
        }
        reg->snapshot(dir / "snapshot.json");
        const auto restored = registry::TrustRegistry::restore(dir / "snapshot.json", clock.clock());
        if (registry_answers(*restored, dids, times) != expected) {
            return fail(o, "restored snapshot disagrees at sequence " + std::to_string(o.cases));
        }
        if (durable) {
            reg.reset();
            registry::TrustRegistry reopened(clock.clock(), dir / "registry");
            if (registry_answers(reopened, dids, times) != expected) {
                return fail(o, "reopened store disagrees at sequence " + std::to_string(o.cases));
            }
        }
    }
    return o;
}

Outcome broker_resilience(std::size_t messages, double crash_rate, std::uint64_t seed) {
    using messaging::FaultPoint;
    fixtures::TempDir dir;
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution crash(crash_rate);
    messaging::Broker broker(messaging::BrokerOptions{.log_path = dir / "broker.log",
                                                      .visibility_window = std::chrono::milliseconds(50)});
    std::size_t crashes = 0;
    bool crash_after = false;
    broker.set_fault_injector([&](FaultPoint p) {
        switch (p) {
        case FaultPoint::publish_before_append:
        case FaultPoint::fetch_before_append:
        case FaultPoint::ack_before_append:
            if (crash(rng)) {
                if (rng() % 2 == 0) {
                    return true;
                }
                crash_after = true;
            }
            return false;
        default:
            return std::exchange(crash_after, false);
        }
    });

    auto recover = [&] {
        ++crashes;
        crash_after = false;
        broker.restart();
    };
    auto retry = [&](auto &&op) {
        for (;;) {
            try {
                return op();
            } catch (const Error &e) {
                if (e.code() != "broker-unavailable") {
                    throw;
                }
                recover();
            }
        }
    };

    const std::string topic = "resilience";
    const std::vector<std::string> subscribers = {"alpha", "beta"};
    std::map<std::string, std::map<std::string, int>> handled;
    std::map<std::string, std::set<std::string>> applied;
    for (const auto &s : subscribers) {
        retry([&] { broker.subscribe(topic, s); });
    }

    auto consume_one = [&](const std::string &sub) {
        std::optional<messaging::QueueMessage> msg;
        try {
            msg = broker.fetch(topic, sub);
        } catch (const Error &e) {
            if (e.code() != "broker-unavailable") {
                throw;
            }
            recover();
            return true;
        }
        if (!msg) {
            return false;
        }
        ++handled[sub][msg->message_id];
        applied[sub].insert(msg->message_id);
        try {
            broker.ack(topic, sub, msg->message_id);
        } catch (const Error &e) {
            if (e.code() != "broker-unavailable") {
                throw;
            }
            recover();
        }
        return true;
    };

    Outcome o;
    for (std::size_t i = 0; i < messages; ++i) {
        const auto id = "m-" + std::to_string(i);
        const auto payload = to_bytes("payload " + std::to_string(i));
        retry([&] { broker.publish_with_id(id, topic, payload); });
        ++o.cases;
        consume_one(subscribers[0]);
        if (i % 2 == 1) {
            consume_one(subscribers[1]);
        }
    }
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(60);
    auto done = [&] {
        return std::all_of(subscribers.begin(), subscribers.end(),
                           [&](const auto &s) { return applied[s].size() >= messages; });
    };
    while (!done() && std::chrono::steady_clock::now() < deadline) {
        bool progress = false;
        for (const auto &s : subscribers) {
            progress = consume_one(s) || progress;
        }
        if (!progress) {
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
    }

    std::size_t redeliveries = 0;
    for (const auto &s : subscribers) {
        if (applied[s].size() != messages) {
            return fail(o, s + " applied " + std::to_string(applied[s].size()) + " of " + std::to_string(messages));
        }
        for (std::size_t i = 0; i < messages; ++i) {
            const auto it = handled[s].find("m-" + std::to_string(i));
            if (it == handled[s].end() || it->second < 1) {
                return fail(o, s + " never handled m-" + std::to_string(i));
            }
            redeliveries += static_cast<std::size_t>(it->second - 1);
        }
    }
    if (broker.message_count() != messages) {
        return fail(o, "broker stored " + std::to_string(broker.message_count()) + " messages");
    }
    if (crashes == 0) {
        return fail(o, "no crash was injected");
    }
    o.detail = std::to_string(crashes) + " crashes, " + std::to_string(redeliveries) + " redeliveries";
    return o;
}

Outcome realtime_fifo_reconnect(std::size_t messages) {
    messaging::RealtimeHub hub;
    messaging::RealtimeServer server(hub, 0, std::chrono::milliseconds(300));
    const auto party = did::did_key_from_public_key(crypto::generate_key_pair().public_key());

    std::mutex mutex;
    std::condition_variable cv;
    std::vector<std::size_t> received;
    auto callback = [&](const messaging::Frame &f) {
        std::lock_guard lock(mutex);
        received.push_back(std::stoul(to_string(f.payload)));
        cv.notify_all();
    };
    auto push = [&](std::size_t i) { return hub.channel_push(party, to_bytes(std::to_string(i))); };

    Outcome o;
    const auto first = messages / 2;
    const auto offline = messages / 4;
    std::size_t buffered = 0;

    auto a = std::make_unique<messaging::RealtimeClient>("127.0.0.1", server.port(), party, callback);
    for (std::size_t i = 0; i < first; ++i) {
        push(i);
    }
    a->close();
    for (std::size_t i = first; i < first + offline; ++i) {
        buffered += push(i) == messaging::DeliveryStatus::buffered;
    }
    std::thread pusher;
    auto b = std::make_unique<messaging::RealtimeClient>("127.0.0.1", server.port(), party, [&](const auto &f) {
        callback(f);
    });
    pusher = std::thread([&] {
        for (std::size_t i = first + offline; i < messages; ++i) {
            push(i);
        }
    });
    pusher.join();

    std::vector<std::size_t> order;
    {
        std::unique_lock lock(mutex);
        auto distinct = [&] { return std::set<std::size_t>(received.begin(), received.end()).size(); };
        cv.wait_for(lock, std::chrono::seconds(20), [&] { return distinct() >= messages; });
        std::set<std::size_t> seen;
        for (const auto v : received) {
            if (seen.insert(v).second) {
                order.push_back(v);
            }
        }
    }
    b->close();
    o.cases = order.size();
    for (std::size_t i = 0; i < messages; ++i) {
        if (i >= order.size()) {
            return fail(o, "only " + std::to_string(order.size()) + " of " + std::to_string(messages) + " arrived");
        }
        if (order[i] != i) {
            return fail(o, "message " + std::to_string(order[i]) + " arrived at position " + std::to_string(i));
        }
    }
    if (buffered == 0) {
        return fail(o, "nothing was buffered while the client was disconnected");
    }
    o.detail = std::to_string(buffered) + " buffered across the reconnect";
    return o;
}

Outcome issuance_adversarial(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    fixtures::Ecosystem eco;
    auto &issuer = *eco.issuer;
    const auto type = std::string(credential::kResumeCredentialType);
    std::map<std::string, std::size_t> codes;
    Outcome o;
    for (; o.cases < cases; ++o.cases) {
        const auto holder = random_key(rng);
        const auto holder_did = did::did_key_from_public_key(holder.public_key());
        const auto resume = fixtures::sample_resume(holder_did);
        const auto offer = issuer.create_offer(resume, type);
        auto token = issuer.exchange_token(offer.offer_id);
        const auto now = eco.clock.now();

        crypto::CompactToken proof;
        switch (o.cases % 4) {
        case 0:
            if ((o.cases / 4) % 2 == 0) {
                proof = crypto::sign_token(Json{{"iss", holder_did.str()},
                                                {"aud", eco.issuer_did.str()},
                                                {"nonce", token.c_nonce},
                                                {"iat", now}},
                                           Json{{"kid", did::did_key_kid(holder_did)}, {"typ", "openid4vci-proof+jwt"}},
                                           random_key(rng));
            } else {
                proof = issuance::build_proof(random_key(rng), eco.issuer_did, token.c_nonce, now);
            }
            break;
        case 1:
            proof = issuance::build_proof(holder, eco.issuer_did, crypto::random_id(32), now);
            break;
        case 2:
            proof = issuance::build_proof(holder, did::new_ebsi_did(), token.c_nonce, now);
            break;
        default:
            proof = issuance::build_proof(holder, eco.issuer_did, token.c_nonce, now);
            issuer.issue_credential(token.access_ref, proof);
            if ((o.cases / 4) % 2 == 1) {
                token = issuer.exchange_token(issuer.create_offer(resume, type).offer_id);
            }
        }

        const auto before = issuer.issued_count();
        try {
            issuer.issue_credential(token.access_ref, proof);
            return fail(o, "adversarial proof accepted at case " + std::to_string(o.cases));
        } catch (const Error &e) {
            ++codes[e.code()];
        }
        if (issuer.issued_count() != before) {
            return fail(o, "issued count moved at case " + std::to_string(o.cases));
        }
    }
    for (const auto &[code, n] : codes) {
        o.detail += (o.detail.empty() ? "" : ", ") + code + "=" + std::to_string(n);
    }
    return o;
}

Outcome issuance_honest(std::size_t cases, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    fixtures::Ecosystem eco;
    auto &issuer = *eco.issuer;
    Outcome o;
    for (std::size_t i = 0; i < cases; ++i) {
        const auto holder = random_key(rng);
        const auto holder_did = did::did_key_from_public_key(holder.public_key());
        const auto offer = issuer.create_offer(fixtures::sample_resume(holder_did), credential::kResumeCredentialType);
        const auto token = issuer.exchange_token(offer.offer_id);
        crypto::CompactToken vc_token;
        try {
            vc_token = issuer.issue_credential(
                token.access_ref, issuance::build_proof(holder, eco.issuer_did, token.c_nonce, eco.clock.now()));
        } catch (const Error &e) {
            return fail(o, "honest proof rejected at case " + std::to_string(i) + ": " + e.what());
        }
        const auto doc = eco.registry.resolve_did_document(offer.issuer);
        const auto key = doc.find_key(vc_token.header().value("kid", std::string{}));
        try {
            if (!key) {
                throw Error("no-key", "credential kid not in the issuer document");
            }
            crypto::verify_token(vc_token, *key);
            if (credential::decode_credential(vc_token).subject != holder_did) {
                throw Error("subject-mismatch", "credential bound to another holder");
            }
        } catch (const Error &e) {
            return fail(o, "issued credential does not verify at case " + std::to_string(i) + ": " + e.what());
        }
        ++o.cases;
    }
    if (issuer.issued_count() != cases) {
        return fail(o, "issuer counted " + std::to_string(issuer.issued_count()) + " credentials");
    }
    return o;
}

} // namespace properties
