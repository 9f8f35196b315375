#include "bizplan/service.hpp"

#include "bizplan/error.hpp"
#include "bizplan/exporter.hpp"
#include "bizplan/hashing.hpp"
#include "bizplan/pitch_prep.hpp"
#include "bizplan/plan_generator.hpp"
#include "bizplan/text_util.hpp"

#include <httplib.h>
#include <openssl/crypto.h>
#include <openssl/rand.h>

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <stop_token>
#include <thread>

namespace bizplan {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- configuration -------------------------------------------------------

ServiceConfig ServiceConfig::load(const json& file_settings, const Lookup& lookup)
{
    if (!file_settings.is_null() && !file_settings.is_object()) {
        throw Error(ErrorCode::InvalidArgument, "config file must hold a JSON object");
    }
    const auto get = [&](const char* name) -> std::optional<std::string> {
        if (auto value = lookup(name)) {
            return value;
        }
        if (file_settings.is_object() && file_settings.contains(name)) {
            const auto& v = file_settings.at(name);
            return v.is_string() ? v.get<std::string>() : v.dump();
        }
        return std::nullopt;
    };

    ServiceConfig config;
    if (auto bind = get("BIND_ADDR")) {
        const auto colon = bind->rfind(':');
        if (colon == std::string::npos) {
            config.bind_host = *bind;
        } else {
            config.bind_host = bind->substr(0, colon);
            try {
                config.port = std::stoi(bind->substr(colon + 1));
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidArgument, "BIND_ADDR port is not a number");
            }
        }
        if (config.bind_host.empty()) {
            config.bind_host = "0.0.0.0";
        }
    }
    if (auto dir = get("DATA_DIR")) {
        config.data_dir = *dir;
    }
    if (auto dir = get("CORPUS_DIR")) {
        config.corpus_dir = *dir;
    }
    if (auto token = get("AUTH_TOKEN"); token && !token->empty()) {
        config.auth_token = *token;
    }
    if (auto mode = get("INGEST_MODE")) {
        if (*mode == "live") {
            config.ingest_mode = IngestMode::live;
        } else if (*mode == "fixture") {
            config.ingest_mode = IngestMode::fixture;
        } else {
            throw Error(ErrorCode::InvalidArgument, "INGEST_MODE must be live or fixture");
        }
    }
    if (auto dir = get("INGEST_FIXTURE_DIR")) {
        config.ingest_fixture_dir = *dir;
    }
    if (auto agent = get("INGEST_USER_AGENT")) {
        config.user_agent = *agent;
    }
    config.gateway = GatewayConfig::from_env(get);
    return config;
}

// ---- error mapping -------------------------------------------------------

ApiError map_error(ErrorCode code, const std::string& message)
{
    const std::string name(to_string(code));
    switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingSection:
    case ErrorCode::InvalidGoal:
    case ErrorCode::UnsupportedMedia:
    case ErrorCode::GapInHistory:
    case ErrorCode::PayloadMismatch:
        return {422, {{"error", name}, {"message", message}}};
    case ErrorCode::UnknownSection:
    case ErrorCode::NotFound:
        return {404, {{"error", name}, {"message", message}}};
    case ErrorCode::StaleProposal:
        return {409, {{"error", name}, {"message", message}}};
    case ErrorCode::StorageCorrupt:
    case ErrorCode::Cancelled:
        return {500, {{"error", name}, {"message", message}}};
    case ErrorCode::Timeout:
    case ErrorCode::ProviderError:
    case ErrorCode::FixtureMiss:
    case ErrorCode::FetchFailed:
    case ErrorCode::NotHtml:
    case ErrorCode::RobotsDisallowed:
    case ErrorCode::ExtractionUnparseable:
    case ErrorCode::NoExemplar:
    case ErrorCode::SectionGenerationFailed:
    case ErrorCode::PartialParse:
    case ErrorCode::QuestionParseFailed:
        break;
    }
    return {502, {{"error", "upstream_failure"}, {"cause", name}, {"message", message}}};
}

// ---- documents -----------------------------------------------------------

struct Service::DocumentEntry {
    std::string document_id;
    std::string owner;
    /// Set when the stored log failed verification; the document is never served.
    std::optional<std::string> corruption;

    /// Held by every mutation of this document (revisions, turns, proposals).
    std::mutex writer;
    Conversation conversation;
    std::map<std::string, EditProposal> proposals;

    std::shared_ptr<const PlanDocument> snapshot() const
    {
        std::lock_guard lock(head_mutex_);
        return head_;
    }

    void publish(PlanDocument document)
    {
        auto next = std::make_shared<const PlanDocument>(std::move(document));
        std::lock_guard lock(head_mutex_);
        head_ = std::move(next);
    }

private:
    mutable std::mutex head_mutex_;
    std::shared_ptr<const PlanDocument> head_;
};

namespace {

struct HttpFailure {
    int status;
    json body;
};

[[noreturn]] void fail(int status, const std::string& error, const std::string& message)
{
    throw HttpFailure{status, {{"error", error}, {"message", message}}};
}

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(canonical_dump(body), "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn)
{
    try {
        fn();
    } catch (const HttpFailure& f) {
        send_json(res, f.status, f.body);
    } catch (const Error& e) {
        const auto mapped = map_error(e.code(), e.what());
        send_json(res, mapped.status, mapped.body);
    } catch (const json::exception& e) {
        send_json(res, 422, {{"error", "invalid_argument"}, {"message", "malformed request body"}});
    } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "internal"}, {"message", "internal error"}});
    }
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) {
        return json::object();
    }
    json body;
    try {
        body = json::parse(req.body);
    } catch (const json::parse_error&) {
        fail(422, "invalid_json", "request body is not valid JSON");
    }
    if (!body.is_object()) {
        fail(422, "invalid_argument", "request body must be a JSON object");
    }
    return body;
}

std::string required_string(const json& body, const char* field)
{
    if (!body.contains(field) || !body.at(field).is_string()) {
        fail(422, "invalid_argument", std::string(field) + " must be a string");
    }
    auto value = body.at(field).get<std::string>();
    if (text::trim(value).empty()) {
        fail(422, "invalid_argument", std::string(field) + " must not be empty");
    }
    return value;
}

std::vector<Goal> parse_goals(const json& body)
{
    if (!body.contains("goals") || !body.at("goals").is_array()) {
        fail(422, "invalid_goal", "goals must be an array");
    }
    std::vector<Goal> goals;
    for (const auto& g : body.at("goals")) {
        try {
            goals.push_back(goal_from_json(g));
        } catch (const json::exception&) {
            fail(422, "invalid_goal", "each goal needs string id, label and detail");
        }
    }
    validate_goals(goals);
    return goals;
}

std::string random_token()
{
    unsigned char bytes[24];
    if (RAND_bytes(bytes, sizeof bytes) != 1) {
        throw std::runtime_error("random source unavailable");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string token = "bpt_";
    for (unsigned char b : bytes) {
        token += kHex[b >> 4];
        token += kHex[b & 0xf];
    }
    return token;
}

bool constant_time_equal(const std::string& a, const std::string& b)
{
    return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

std::optional<std::string> bearer_token(const httplib::Request& req)
{
    const auto header = req.get_header_value("Authorization");
    if (!text::istarts_with(header, "Bearer ")) {
        return std::nullopt;
    }
    auto token = std::string(text::trim(std::string_view(header).substr(7)));
    if (token.empty()) {
        return std::nullopt;
    }
    return token;
}

int id_number(std::string_view id)
{
    const auto dash = id.rfind('-');
    if (dash == std::string_view::npos) {
        return 0;
    }
    try {
        return std::stoi(std::string(id.substr(dash + 1)));
    } catch (const std::exception&) {
        return 0;
    }
}

json suggestions_json(const SuggestionPair& pair)
{
    return json::array({to_json(pair.first), to_json(pair.second)});
}

/// One server-sent-event stream. A worker thread produces events; httplib pulls
/// them through pump(). Dropping the channel (client gone) requests a stop and
/// joins the worker.
class SseChannel {
public:
    SseChannel() = default;
    SseChannel(const SseChannel&) = delete;
    SseChannel& operator=(const SseChannel&) = delete;

    ~SseChannel()
    {
        stop_.request_stop();
        if (worker_.joinable()) {
            worker_.join();
        }
    }

    void start(std::function<void(SseChannel&)> body)
    {
        worker_ = std::thread([this, body = std::move(body)] {
            try {
                body(*this);
            } catch (...) {
                // Bodies report their own errors as events.
            }
            close();
        });
    }

    void send(std::string_view event, const json& data)
    {
        std::string frame = "event: ";
        frame += event;
        frame += "\ndata: ";
        frame += canonical_dump(data);
        frame += "\n\n";
        std::lock_guard lock(mutex_);
        queue_.push_back(std::move(frame));
        cv_.notify_all();
    }

    std::stop_token stop_token() const { return stop_.get_token(); }

    bool pump(httplib::DataSink& sink)
    {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, std::chrono::milliseconds(100), [&] { return !queue_.empty() || closed_; });
        while (!queue_.empty()) {
            auto frame = std::move(queue_.front());
            queue_.pop_front();
            lock.unlock();
            if (!sink.write(frame.data(), frame.size())) {
                stop_.request_stop();
                return false;
            }
            lock.lock();
        }
        const bool closed = closed_;
        lock.unlock();
        if (closed) {
            sink.done();
            return true;
        }
        if (!sink.is_writable()) {
            stop_.request_stop();
            return false;
        }
        return true;
    }

private:
    void close()
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
        cv_.notify_all();
    }

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::string> queue_;
    bool closed_ = false;
    std::stop_source stop_;
    std::thread worker_; // last: joined before the state above is destroyed
};

void stream_events(httplib::Response& res, int status, std::function<void(SseChannel&)> body)
{
    auto channel = std::make_shared<SseChannel>();
    channel->start(std::move(body));
    res.status = status;
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream",
                                     [channel](std::size_t, httplib::DataSink& sink) { return channel->pump(sink); });
}

json error_event(const Error& e) { return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}; }

} // namespace

// ---- handlers ------------------------------------------------------------

class Service::Handlers {
public:
    explicit Handlers(Service& s) : s_(s) {}

    Account require_account(const httplib::Request& req) const
    {
        const auto token = bearer_token(req);
        if (!token) {
            fail(401, "unauthenticated", "bearer token required");
        }
        const auto hash = sha256_hex(*token);
        std::shared_lock lock(s_.accounts_mutex_);
        const auto it = s_.accounts_by_hash_.find(hash);
        if (it == s_.accounts_by_hash_.end()) {
            fail(401, "unauthenticated", "unknown bearer token");
        }
        return it->second;
    }

    std::shared_ptr<DocumentEntry> owned_document(const httplib::Request& req, const Account& account) const
    {
        const std::string id = req.matches[1];
        auto entry = s_.find_document(id);
        if (!entry) {
            fail(404, "not_found", "unknown document");
        }
        if (entry->corruption) {
            fail(500, "storage_corrupt", "document " + id + " failed integrity checks and is not served");
        }
        if (entry->owner != account.account_id) {
            fail(403, "forbidden", "document belongs to another account");
        }
        return entry;
    }

    void persist_revision(DocumentEntry& entry, const PlanDocument& next)
    {
        const auto history = next.history();
        s_.store_->append_revision(entry.document_id, history.revisions.back(), history.payloads.back());
        entry.publish(next);
    }

    void issue_token(const httplib::Request& req, httplib::Response& res)
    {
        const auto body = parse_body(req);
        std::string presented;
        if (body.contains("bootstrap_token") && body.at("bootstrap_token").is_string()) {
            presented = body.at("bootstrap_token").get<std::string>();
        } else if (auto token = bearer_token(req)) {
            presented = *token;
        }
        if (s_.config_.auth_token && !constant_time_equal(presented, *s_.config_.auth_token)) {
            fail(401, "unauthenticated", "bootstrap token rejected");
        }
        std::string display_name = "owner";
        if (body.contains("display_name")) {
            display_name = required_string(body, "display_name");
        }
        if (text::utf8_length(display_name) > 200) {
            fail(422, "invalid_argument", "display_name is too long");
        }

        const auto token = random_token();
        Account account{s_.next_id("acct", s_.account_counter_), display_name, sha256_hex(token)};
        {
            std::unique_lock lock(s_.accounts_mutex_);
            s_.store_->append_account({{"account_id", account.account_id},
                                       {"display_name", account.display_name},
                                       {"token_hash", account.token_hash}});
            s_.accounts_by_hash_[account.token_hash] = account;
        }
        send_json(res, 201, {{"account_id", account.account_id}, {"display_name", display_name}, {"token", token}});
    }

    /// Shared tail of both onboarding flows: draft, persist revision 0, announce.
    void run_onboarding(SseChannel& channel, const std::string& document_id, const std::string& owner,
                        const std::function<BusinessContext()>& build_context, const std::vector<Goal>& goals)
    {
        try {
            const auto context = build_context();
            DraftOptions options;
            options.identity = DocumentIdentity{document_id, owner, Author::assistant, s_.clock_()};
            options.on_section_done = [&](SectionId id) {
                channel.send("section_done", {{"section_id", std::string(to_string(id))}});
            };
            options.stop = channel.stop_token();
            auto draft = generate_draft(context, goals, *s_.gateway_, s_.corpus_, options);
            if (channel.stop_token().stop_requested()) {
                return;
            }
            auto entry = std::make_shared<DocumentEntry>();
            entry->document_id = document_id;
            entry->owner = owner;
            persist_revision(*entry, draft);
            s_.register_document(entry);
            channel.send("draft_ready", {{"document_id", document_id}});
        } catch (const Error& e) {
            channel.send("error", error_event(e));
        } catch (const std::exception&) {
            channel.send("error", {{"code", "internal"}, {"message", "onboarding failed"}});
        }
    }

    void onboard_website(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto body = parse_body(req);
        const auto url = required_string(body, "url");
        if (!text::istarts_with(url, "http://") && !text::istarts_with(url, "https://")) {
            fail(422, "invalid_argument", "url must be an absolute http(s) URL");
        }
        const auto goals = parse_goals(body);
        const auto document_id = s_.next_id("plan", s_.document_counter_);
        stream_events(res, 202, [this, url, goals, document_id, owner = account.account_id](SseChannel& channel) {
            run_onboarding(
                channel, document_id, owner,
                [&] {
                    const auto page = fetch_and_strip(url, *s_.fetcher_, s_.clock_);
                    return context_from_page(page, *s_.gateway_);
                },
                goals);
        });
    }

    void onboard_chat(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto body = parse_body(req);
        if (!body.contains("transcript") || !body.at("transcript").is_array()) {
            fail(422, "invalid_argument", "transcript must be an array of {role, text}");
        }
        std::vector<Message> transcript;
        bool has_user = false;
        for (const auto& turn : body.at("transcript")) {
            if (!turn.is_object()) {
                fail(422, "invalid_argument", "transcript entries must be objects");
            }
            const auto role = required_string(turn, "role");
            const auto content = required_string(turn, "text");
            if (role == "user") {
                transcript.push_back({Role::user, content});
                has_user = true;
            } else if (role == "assistant") {
                transcript.push_back({Role::assistant, content});
            } else {
                fail(422, "invalid_argument", "transcript role must be user or assistant");
            }
        }
        if (!has_user) {
            fail(422, "invalid_argument", "transcript needs at least one user message");
        }
        const auto goals = parse_goals(body);
        const auto document_id = s_.next_id("plan", s_.document_counter_);
        stream_events(res, 202,
                      [this, transcript, goals, document_id, owner = account.account_id](SseChannel& channel) {
                          run_onboarding(
                              channel, document_id, owner,
                              [&] { return context_from_chat(transcript, *s_.gateway_, "conv-" + document_id); },
                              goals);
                      });
    }

    void get_plan(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        res.status = 200;
        res.set_content(serialize(*entry->snapshot()), "application/json");
    }

    void export_plan(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("md");
        const auto plan = entry->snapshot();
        res.status = 200;
        if (format == "md") {
            res.set_content(export_markdown(*plan), "text/markdown; charset=utf-8");
        } else if (format == "html") {
            res.set_content(export_html(*plan), "text/html; charset=utf-8");
        } else {
            fail(422, "invalid_argument", "format must be md or html");
        }
    }

    void chat(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        const auto body = parse_body(req);
        const auto message = required_string(body, "message");
        stream_events(res, 200, [this, entry, message](SseChannel& channel) { run_chat(channel, *entry, message); });
    }

    void run_chat(SseChannel& channel, DocumentEntry& entry, const std::string& message)
    {
        Conversation prior;
        {
            std::lock_guard lock(entry.writer);
            prior = entry.conversation;
        }
        const auto plan = entry.snapshot();
        std::vector<EditProposal> proposals;
        Conversation updated = prior;
        try {
            std::optional<ProposeResult> result;
            try {
                result = propose_edit(message, prior, *plan, *s_.gateway_,
                                      [&](std::string_view delta) { channel.send("delta", {{"text", delta}}); });
            } catch (const Error& e) {
                channel.send("error", error_event(e));
            }
            if (!channel.stop_token().stop_requested()) {
                std::lock_guard lock(entry.writer);
                const auto focus = result ? result->target_section : current_topic(prior, *plan);
                ChatTurn user_turn{entry.conversation.size(), Author::user, message,
                                   tag_focus(message).value_or(focus)};
                s_.store_->append_conversation_event(entry.document_id, {{"type", "turn"}, {"turn", to_json(user_turn)}});
                entry.conversation.push_back(user_turn);
                if (result) {
                    ChatTurn reply{entry.conversation.size(), Author::assistant, result->assistant_reply, focus};
                    s_.store_->append_conversation_event(entry.document_id,
                                                         {{"type", "turn"}, {"turn", to_json(reply)}});
                    entry.conversation.push_back(reply);
                    for (const auto& p : result->proposals) {
                        s_.store_->append_conversation_event(entry.document_id,
                                                             {{"type", "proposal"}, {"proposal", to_json(p)}});
                        entry.proposals[p.proposal_id] = p;
                    }
                    proposals = result->proposals;
                }
                updated = entry.conversation;
            }
        } catch (const Error& e) {
            channel.send("error", error_event(e));
        } catch (const std::exception&) {
            channel.send("error", {{"code", "internal"}, {"message", "chat turn failed"}});
        }

        // Exactly one final event, always carrying two suggestions.
        SuggestionPair pair;
        try {
            pair = suggest_prompts(updated, *entry.snapshot(), *s_.gateway_);
        } catch (const std::exception&) {
            const auto latest = entry.snapshot();
            pair = {fallback_suggestion(SuggestionKind::exploitation, current_topic(updated, *latest)),
                    fallback_suggestion(SuggestionKind::exploration, explore_target(updated, *latest))};
        }
        json proposals_json = json::array();
        for (const auto& p : proposals) {
            proposals_json.push_back(to_json(p));
        }
        channel.send("final", {{"proposals", proposals_json}, {"suggestions", suggestions_json(pair)}});
    }

    void apply(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        const auto body = parse_body(req);
        const auto proposal_id = required_string(body, "proposal_id");

        std::lock_guard lock(entry->writer);
        const auto it = entry->proposals.find(proposal_id);
        if (it == entry->proposals.end()) {
            fail(404, "not_found", "unknown proposal");
        }
        const auto head = entry->snapshot();
        if (it->second.base_revision != head->head()) {
            send_json(res, 409,
                      {{"error", "stale_proposal"},
                       {"head", head->head()},
                       {"message", "proposal was generated against an older revision"}});
            return;
        }
        auto next = apply_edit(*head, it->second, s_.clock_());
        persist_revision(*entry, next);
        res.status = 200;
        res.set_content(serialize(next), "application/json");
    }

    void edit_section(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        const auto section = section_from_string(std::string(req.matches[2]));
        const auto body = parse_body(req);
        if (!body.contains("replacement")) {
            fail(422, "invalid_argument", "replacement is required");
        }
        const auto replacement = rich_text_from_json(body.at("replacement"));

        std::lock_guard lock(entry->writer);
        const auto head = entry->snapshot();
        if (body.contains("base_revision")) {
            const auto& base = body.at("base_revision");
            if (!base.is_number_unsigned()) {
                fail(422, "invalid_argument", "base_revision must be a revision index");
            }
            if (base.get<std::size_t>() != head->head()) {
                send_json(res, 409,
                          {{"error", "stale_proposal"},
                           {"head", head->head()},
                           {"message", "edit was made against an older revision"}});
                return;
            }
        }
        auto next = head->with_section(ChangeKind::section_replace, section, replacement, Author::user, s_.clock_());
        persist_revision(*entry, next);
        res.status = 200;
        res.set_content(serialize(next), "application/json");
    }

    void inline_candidates(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        const auto body = parse_body(req);
        InlineRequest request;
        request.section = section_from_string(required_string(body, "section_id"));
        request.criteria = required_string(body, "criteria");
        if (body.contains("cursor_block")) {
            if (!body.at("cursor_block").is_number_unsigned()) {
                fail(422, "invalid_argument", "cursor_block must be a non-negative integer");
            }
            request.cursor_block = body.at("cursor_block").get<std::size_t>();
        }
        const auto result = inline_generate(request, *entry->snapshot(), *s_.gateway_, s_.corpus_);
        json candidates = json::array();
        for (const auto& c : result.candidates) {
            candidates.push_back(to_json(c));
        }
        json exemplars = json::array();
        for (const auto& e : result.exemplars) {
            exemplars.push_back(to_json(e));
        }
        send_json(res, 200, {{"candidates", candidates}, {"exemplars", exemplars}});
    }

    void pitch_prep(const httplib::Request& req, httplib::Response& res)
    {
        const auto account = require_account(req);
        const auto entry = owned_document(req, account);
        const auto body = parse_body(req);
        const auto goal_id = required_string(body, "goal_id");
        const auto prep = prepare_pitch(*entry->snapshot(), goal_id, *s_.gateway_, s_.clock_());
        send_json(res, 200, to_json(prep));
    }

    void experts(const httplib::Request& req, httplib::Response& res)
    {
        std::optional<SectionId> focus;
        if (req.has_param("focus") && !req.get_param_value("focus").empty()) {
            focus = section_from_string(req.get_param_value("focus"));
        }
        json list = json::array();
        for (const auto& e : list_experts(s_.corpus_, focus)) {
            list.push_back(to_json(e));
        }
        send_json(res, 200, {{"experts", list}});
    }

    void transcribe(const httplib::Request& req, httplib::Response& res)
    {
        require_account(req);
        if (!req.is_multipart_form_data() || !req.has_file("audio")) {
            fail(422, "invalid_argument", "multipart field 'audio' is required");
        }
        const auto file = req.get_file_value("audio");
        auto media_type = file.content_type;
        if (const auto semi = media_type.find(';'); semi != std::string::npos) {
            media_type = std::string(text::trim(std::string_view(media_type).substr(0, semi)));
        }
        const auto text = s_.gateway_->transcribe(file.content, text::to_lower(media_type));
        send_json(res, 200, {{"text", text}});
    }

    void tooltips(const httplib::Request& req, httplib::Response& res)
    {
        const auto section = section_from_string(std::string(req.matches[1]));
        send_json(res, 200,
                  {{"section_id", std::string(to_string(section))},
                   {"questions", tooltip_questions(section, s_.corpus_)}});
    }

    void exemplars(const httplib::Request& req, httplib::Response& res)
    {
        const auto section = section_from_string(std::string(req.matches[1]));
        json list = json::array();
        for (const auto& e : s_.corpus_.exemplars(section)) {
            list.push_back(to_json(e));
        }
        send_json(res, 200, {{"section_id", std::string(to_string(section))}, {"exemplars", list}});
    }

    void health(const httplib::Request&, httplib::Response& res)
    {
        send_json(res, 200, {{"status", "ok"}, {"documents", s_.document_count()}});
    }

private:
    Service& s_;
};

// ---- service -------------------------------------------------------------

Service::Service(ServiceConfig config, ServiceDeps deps) : config_(std::move(config))
{
    const bool mock = config_.gateway.mode == GatewayMode::mock;
    clock_ = deps.clock ? *deps.clock : (mock ? frozen_clock(mock_epoch()) : system_clock());

    store_ = deps.store ? deps.store : std::make_shared<FileEventStore>(config_.data_dir);

    if (deps.fetcher) {
        fetcher_ = deps.fetcher;
    } else if (config_.ingest_mode == IngestMode::live) {
        fetcher_ = std::make_shared<LiveFetcher>(config_.user_agent);
    } else {
        fetcher_ = std::make_shared<FixtureFetcher>(config_.ingest_fixture_dir);
    }

    auto provider = deps.provider;
    if (!provider) {
        config_.gateway.validate();
        provider = make_provider(config_.gateway);
    }
    if (deps.sleeper) {
        gateway_ = std::make_unique<Gateway>(provider, config_.gateway, deps.sleeper,
                                             [] { return std::chrono::steady_clock::now(); });
    } else {
        gateway_ = std::make_unique<Gateway>(provider, config_.gateway);
    }

    corpus_ = Corpus::load(config_.corpus_dir);
    recover();
}

Service::~Service() = default;

void Service::recover()
{
    int max_account = 0;
    for (const auto& record : store_->load_accounts()) {
        Account account{record.at("account_id").get<std::string>(), record.at("display_name").get<std::string>(),
                        record.at("token_hash").get<std::string>()};
        max_account = std::max(max_account, id_number(account.account_id));
        accounts_by_hash_[account.token_hash] = std::move(account);
    }
    account_counter_ = max_account;

    int max_document = 0;
    for (const auto& id : store_->document_ids()) {
        auto entry = std::make_shared<DocumentEntry>();
        entry->document_id = id;
        max_document = std::max(max_document, id_number(id));
        try {
            auto document = store_->load_document(id);
            entry->owner = document.owner();
            entry->publish(std::move(document));
            for (const auto& event : store_->load_conversation(id)) {
                const auto type = event.at("type").get<std::string>();
                if (type == "turn") {
                    auto turn = turn_from_json(event.at("turn"));
                    if (turn.turn_index != entry->conversation.size()) {
                        throw Error(ErrorCode::StorageCorrupt, "conversation of " + id + " has a gap");
                    }
                    entry->conversation.push_back(std::move(turn));
                } else if (type == "proposal") {
                    auto proposal = proposal_from_json(event.at("proposal"));
                    entry->proposals[proposal.proposal_id] = std::move(proposal);
                }
            }
        } catch (const Error& e) {
            entry->corruption = e.what();
        } catch (const json::exception&) {
            entry->corruption = "unreadable conversation record";
        }
        documents_[id] = std::move(entry);
    }
    document_counter_ = max_document;
}

std::string Service::next_id(const char* prefix, std::atomic<int>& counter)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%04d", prefix, ++counter);
    return buf;
}

std::shared_ptr<Service::DocumentEntry> Service::find_document(const std::string& id) const
{
    std::shared_lock lock(documents_mutex_);
    const auto it = documents_.find(id);
    return it == documents_.end() ? nullptr : it->second;
}

void Service::register_document(std::shared_ptr<DocumentEntry> entry)
{
    std::unique_lock lock(documents_mutex_);
    documents_[entry->document_id] = std::move(entry);
}

std::size_t Service::document_count() const
{
    std::shared_lock lock(documents_mutex_);
    return documents_.size();
}

void Service::mount(httplib::Server& server)
{
    auto h = std::make_shared<Handlers>(*this);
    const auto bind = [h](void (Handlers::*fn)(const httplib::Request&, httplib::Response&)) {
        return [h, fn](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { ((*h).*fn)(req, res); });
        };
    };
    const std::string id = "([A-Za-z0-9_-]+)";

    server.Get("/health", bind(&Handlers::health));
    server.Post("/auth/token", bind(&Handlers::issue_token));
    server.Post("/onboard/website", bind(&Handlers::onboard_website));
    server.Post("/onboard/chat", bind(&Handlers::onboard_chat));
    server.Get("/plans/" + id, bind(&Handlers::get_plan));
    server.Get("/plans/" + id + "/export", bind(&Handlers::export_plan));
    server.Post("/plans/" + id + "/chat", bind(&Handlers::chat));
    server.Post("/plans/" + id + "/apply", bind(&Handlers::apply));
    server.Post("/plans/" + id + "/sections/" + id + "/edit", bind(&Handlers::edit_section));
    server.Post("/plans/" + id + "/inline", bind(&Handlers::inline_candidates));
    server.Post("/plans/" + id + "/pitch-prep", bind(&Handlers::pitch_prep));
    server.Get("/experts", bind(&Handlers::experts));
    server.Post("/transcribe", bind(&Handlers::transcribe));
    server.Get("/sections/" + id + "/tooltips", bind(&Handlers::tooltips));
    server.Get("/sections/" + id + "/exemplars", bind(&Handlers::exemplars));
}

} // namespace bizplan
