#include "resumevc/http.hpp"

#include <httplib.h>

#include <thread>

#include "resumevc/error.hpp"

namespace resumevc::http {

int status_for_error(std::string_view code) {
    if (code == "not-found" || code.starts_with("unknown-") || code == "no-document") {
        return 404;
    }
    if (code.starts_with("already-") || code.ends_with("-already-used") || code == "request-already-answered") {
        return 409;
    }
    if (code.ends_with("-unconfigured") || code == "broker-unavailable") {
        return 503;
    }
    return 400;
}

class HttpService::Impl {
  public:
    httplib::Server server;
    std::thread thread;
    std::string host;
    std::uint16_t port = 0;
};

namespace {

using Handler = std::function<Json(const httplib::Request &)>;

void reply(httplib::Response &res, int status, const Json &body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

httplib::Server::Handler wrap(Handler fn) {
    return [fn = std::move(fn)](const httplib::Request &req, httplib::Response &res) {
        try {
            reply(res, 200, fn(req));
        } catch (const Error &e) {
            reply(res, status_for_error(e.code()), Json{{"code", e.code()}, {"message", e.message()}});
        } catch (const Json::exception &e) {
            reply(res, 400, Json{{"code", "bad-request"}, {"message", e.what()}});
        } catch (const std::exception &e) {
            reply(res, 500, Json{{"code", "internal-error"}, {"message", e.what()}});
        }
    };
}

Json body_of(const httplib::Request &req) {
    try {
        return Json::parse(req.body);
    } catch (const Json::exception &e) {
        throw Error("bad-request", std::string("body is not JSON: ") + e.what());
    }
}

std::string string_field(const Json &body, const char *name) {
    auto it = body.find(name);
    if (it == body.end() || !it->is_string()) {
        throw Error("bad-request", std::string("field '") + name + "' must be a string");
    }
    return it->get<std::string>();
}

did::Did did_param(const httplib::Request &req, std::size_t index = 1) {
    return did::Did::parse(req.matches[static_cast<int>(index)].str());
}

std::unique_ptr<HttpService> make_service(const std::function<void(httplib::Server &)> &routes) {
    auto impl = std::make_unique<HttpService::Impl>();
    impl->server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                      {"Access-Control-Allow-Headers", "Content-Type"},
                                      {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
    impl->server.Options(".*", [](const httplib::Request &, httplib::Response &res) { res.status = 204; });
    routes(impl->server);
    return std::make_unique<HttpService>(std::move(impl));
}

} // namespace

HttpService::HttpService(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}

HttpService::~HttpService() { stop(); }

std::uint16_t HttpService::start(std::uint16_t port, const std::string &host) {
    impl_->server.set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char *>(&yes), sizeof(yes));
    });
    int bound = 0;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (impl_->server.bind_to_port(host, port)) {
        bound = port;
    }
    if (bound <= 0) {
        throw Error("port-in-use", "cannot bind " + host + ":" + std::to_string(port));
    }
    impl_->host = host;
    impl_->port = static_cast<std::uint16_t>(bound);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

std::uint16_t HttpService::port() const noexcept { return impl_->port; }

std::string HttpService::url() const { return "http://" + impl_->host + ":" + std::to_string(impl_->port); }

void HttpService::wait() {
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

void HttpService::stop() {
    if (!impl_) {
        return;
    }
    impl_->server.stop();
    wait();
}

// Registry -------------------------------------------------------------------

std::unique_ptr<HttpService> registry_service(registry::TrustRegistry &reg) {
    return make_service([&reg](httplib::Server &s) {
        s.Get(R"(/did/([^/]+))",
              wrap([&reg](const auto &req) { return reg.resolve_did_document(did_param(req)).to_json(); }));
        s.Post("/did", wrap([&reg](const auto &req) {
                   return Json{{"sequence", reg.register_did_document(did::DidDocument::from_json(body_of(req)))}};
               }));
        s.Delete(R"(/did/([^/]+))", wrap([&reg](const auto &req) {
                     return Json{{"sequence", reg.deactivate_did_document(did_param(req))}};
                 }));
        s.Get(R"(/tir/([^/]+))", wrap([&reg](const httplib::Request &req) {
                  const auto did = did_param(req);
                  const auto type = req.has_param("type") ? req.get_param_value("type")
                                                          : std::string(credential::kResumeCredentialType);
                  bool trusted = false;
                  if (req.has_param("at")) {
                      Timestamp at = 0;
                      try {
                          at = std::stoll(req.get_param_value("at"));
                      } catch (const std::exception &) {
                          throw Error("bad-request", "'at' must be an integer timestamp");
                      }
                      trusted = reg.tir_is_trusted(did, type, at);
                  } else {
                      trusted = reg.tir_is_trusted_now(did, type);
                  }
                  const auto entry = reg.tir_entry(did);
                  return Json{{"trusted", trusted}, {"entry", entry ? entry->to_json() : Json(nullptr)}};
              }));
        s.Post("/tir", wrap([&reg](const auto &req) {
                   const auto body = body_of(req);
                   const auto did = did::Did::parse(string_field(body, "did"));
                   auto types = body.value("accreditedFor",
                                           std::vector<std::string>{std::string(credential::kResumeCredentialType)});
                   return reg.tir_register(did, std::move(types)).to_json();
               }));
        s.Delete(R"(/tir/([^/]+))",
                 wrap([&reg](const auto &req) { return reg.tir_revoke(did_param(req)).to_json(); }));
        s.Get("/events", wrap([&reg](const auto &) {
                  Json out = Json::array();
                  for (const auto &e : reg.events()) {
                      out.push_back(e.to_json());
                  }
                  return out;
              }));
    });
}

// Issuer ---------------------------------------------------------------------

std::unique_ptr<HttpService> issuer_service(issuance::IssuerService &issuer) {
    return make_service([&issuer](httplib::Server &s) {
        s.Post("/offers", wrap([&issuer](const auto &req) {
                   const auto body = body_of(req);
                   const auto &resume_json = body.contains("resume") ? body.at("resume") : body;
                   const auto type =
                       body.value("credentialType", std::string(credential::kResumeCredentialType));
                   return issuer.create_offer(credential::Resume::from_json(resume_json), type).to_json();
               }));
        s.Post("/token", wrap([&issuer](const auto &req) {
                   return issuer.exchange_token(string_field(body_of(req), "offerId")).to_json();
               }));
        s.Post("/credential", wrap([&issuer](const auto &req) {
                   const auto body = body_of(req);
                   const auto proof = crypto::CompactToken::parse(string_field(body, "proof"));
                   return Json{
                       {"credential", issuer.issue_credential(string_field(body, "accessRef"), proof).serialize()}};
               }));
    });
}

// Verifier -------------------------------------------------------------------

std::unique_ptr<HttpService> verifier_service(verification::VerifierService &verifier) {
    return make_service([&verifier](httplib::Server &s) {
        s.Post("/requests", wrap([&verifier](const httplib::Request &req) {
                   const auto body = req.body.empty() ? Json::object() : body_of(req);
                   const auto type = body.value("credentialType", std::string(credential::kResumeCredentialType));
                   std::optional<did::Did> holder;
                   if (body.contains("holderDid") && !body.at("holderDid").is_null()) {
                       holder = did::Did::parse(string_field(body, "holderDid"));
                   }
                   return verifier.create_presentation_request(type, holder).to_frame();
               }));
        s.Get(R"(/requests/([^/]+))", wrap([&verifier](const auto &req) {
                  const auto id = req.matches[1].str();
                  auto found = verifier.find_request(id);
                  if (!found) {
                      throw Error("unknown-request", "no request " + id);
                  }
                  return found->to_frame();
              }));
        s.Post(R"(/verify/([^/]+))", wrap([&verifier](const auto &req) {
                   const auto envelope = crypto::EncryptedEnvelope::parse(req.body);
                   return verifier.verify_presentation(req.matches[1].str(), envelope).to_json();
               }));
        s.Get(R"(/reports/([^/]+))",
              wrap([&verifier](const auto &req) { return verifier.get_report(req.matches[1].str()).to_json(); }));
    });
}

// Wallet ---------------------------------------------------------------------

Json credential_summary(const credential::VerifiableCredential &vc) {
    return Json{{"id", vc.id},
                {"type", vc.type},
                {"issuer", vc.issuer.str()},
                {"subject", vc.subject.str()},
                {"issuedAt", vc.issued_at},
                {"expiresAt", vc.expires_at},
                {"token", vc.token.serialize()}};
}

std::unique_ptr<HttpService> wallet_service(wallet::Wallet &w, WalletServiceOptions options) {
    return make_service([&w, options](httplib::Server &s) {
        s.Get("/wallet", wrap([&w](const auto &) {
                  Json resumes = Json::array();
                  for (const auto &r : w.resumes()) {
                      resumes.push_back({{"id", r.id}, {"resume", r.resume.to_json()}});
                  }
                  Json creds = Json::array();
                  for (const auto &c : w.credentials()) {
                      creds.push_back(credential_summary(c));
                  }
                  Json pending = Json::array();
                  for (const auto &p : w.pending_requests()) {
                      pending.push_back(p.to_frame());
                  }
                  return Json{{"holderDid", w.holder_did().str()},
                              {"resumes", resumes},
                              {"credentials", creds},
                              {"pendingRequests", pending}};
              }));
        s.Post("/resumes", wrap([&w](const auto &req) {
                   return Json{{"resumeId", w.create_resume(string_field(body_of(req), "fullName"))}};
               }));
        s.Post(R"(/resumes/([^/]+)/positions)", wrap([&w](const auto &req) {
                   return w.add_position(req.matches[1].str(), credential::Position::from_json(body_of(req)))
                       .to_json();
               }));
        s.Post("/credentials", wrap([&w, options](const auto &req) {
                   if (!options.issuer || !options.registry) {
                       throw Error("wallet-unconfigured", "no issuer or registry endpoint configured");
                   }
                   const auto body = body_of(req);
                   const auto type = body.value("credentialType", std::string(credential::kResumeCredentialType));
                   return credential_summary(
                       w.acquire_credential(*options.issuer, *options.registry, string_field(body, "resumeId"), type));
               }));
        s.Get("/requests", wrap([&w](const auto &) {
                  Json pending = Json::array();
                  for (const auto &p : w.pending_requests()) {
                      pending.push_back(p.to_frame());
                  }
                  return pending;
              }));
        s.Post("/requests", wrap([&w](const auto &req) {
                   const auto request = verification::PresentationRequest::from_frame(body_of(req));
                   w.receive_request(request);
                   return Json{{"requestId", request.request_id}};
               }));
        s.Post(R"(/requests/([^/]+)/approve)", wrap([&w, options](const auto &req) {
                   const auto id = req.matches[1].str();
                   const auto pending = w.pending_requests();
                   auto it = std::find_if(pending.begin(), pending.end(),
                                          [&](const auto &p) { return p.request_id == id; });
                   if (it == pending.end()) {
                       if (w.answered(id) || w.declined(id)) {
                           throw Error("request-already-answered", "request " + id + " was already answered");
                       }
                       throw Error("unknown-request", "no pending request " + id);
                   }
                   const auto envelope = w.handle_presentation_request(*it);
                   Json out{{"requestId", id}, {"envelope", envelope.to_json()}};
                   if (options.verifier) {
                       out["report"] = options.verifier->verify(id, envelope).to_json();
                   }
                   return out;
               }));
        s.Post(R"(/requests/([^/]+)/decline)", wrap([&w](const auto &req) {
                   const auto id = req.matches[1].str();
                   w.decline_request(id);
                   return Json{{"requestId", id}, {"declined", true}};
               }));
    });
}

} // namespace resumevc::http
