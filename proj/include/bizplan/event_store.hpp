#pragma once

#include "bizplan/document.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

namespace bizplan {

/// Append-only file of checksummed JSON records, one per line:
///   <crc32 as 8 hex digits> <compact json>\n
/// append() returns only after the record is on stable storage. A final line
/// without its newline is an unacknowledged write and is discarded; a checksum
/// mismatch anywhere else raises StorageCorrupt.
class RecordLog {
public:
    explicit RecordLog(std::filesystem::path path);

    void append(const nlohmann::json& record);
    std::vector<nlohmann::json> read() const;
    bool exists() const;
    const std::filesystem::path& path() const noexcept { return path_; }

    static std::string encode(const nlohmann::json& record);

private:
    void drop_torn_tail();

    std::filesystem::path path_;
    mutable std::mutex mutex_;
};

/// Storage seam for the service: document event logs, conversation logs and accounts.
class EventStore {
public:
    virtual ~EventStore() = default;

    virtual void append_revision(const std::string& document_id, const Revision& revision,
                                 const ChangePayload& payload) = 0;
    virtual void append_conversation_event(const std::string& document_id, const nlohmann::json& event) = 0;
    virtual void append_account(const nlohmann::json& account) = 0;

    virtual std::vector<std::string> document_ids() const = 0;
    /// Replays the document's log. Throws StorageCorrupt on a damaged record.
    virtual PlanDocument load_document(const std::string& document_id) const = 0;
    virtual std::vector<nlohmann::json> load_conversation(const std::string& document_id) const = 0;
    virtual std::vector<nlohmann::json> load_accounts() const = 0;
};

/// Directory layout: documents/<id>.log, conversations/<id>.log, accounts.log.
class FileEventStore : public EventStore {
public:
    explicit FileEventStore(std::filesystem::path root);

    void append_revision(const std::string& document_id, const Revision& revision,
                         const ChangePayload& payload) override;
    void append_conversation_event(const std::string& document_id, const nlohmann::json& event) override;
    void append_account(const nlohmann::json& account) override;

    std::vector<std::string> document_ids() const override;
    PlanDocument load_document(const std::string& document_id) const override;
    std::vector<nlohmann::json> load_conversation(const std::string& document_id) const override;
    std::vector<nlohmann::json> load_accounts() const override;

    std::filesystem::path document_log(const std::string& document_id) const;

private:
    std::filesystem::path root_;
};

} // namespace bizplan
