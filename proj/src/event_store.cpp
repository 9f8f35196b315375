#include "bizplan/event_store.hpp"

#include "bizplan/error.hpp"
#include "bizplan/hashing.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace bizplan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Fd {
public:
    explicit Fd(int fd) : fd_(fd) {}
    ~Fd()
    {
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    int get() const noexcept { return fd_; }

private:
    int fd_;
};

[[noreturn]] void raise_errno(const char* what)
{
    throw std::system_error(errno, std::generic_category(), what);
}

void fsync_dir(const fs::path& dir)
{
    Fd fd(::open(dir.c_str(), O_RDONLY | O_DIRECTORY));
    if (fd.get() >= 0) {
        ::fsync(fd.get());
    }
}

std::string hex32(std::uint32_t v)
{
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

bool is_safe_id(const std::string& id)
{
    if (id.empty() || id.size() > 128) {
        return false;
    }
    for (char c : id) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) {
            return false;
        }
    }
    return true;
}

} // namespace

RecordLog::RecordLog(fs::path path) : path_(std::move(path)) {}

std::string RecordLog::encode(const json& record)
{
    const auto body = canonical_dump(record);
    return hex32(crc32_of(body)) + " " + body + "\n";
}

bool RecordLog::exists() const { return fs::exists(path_); }

void RecordLog::drop_torn_tail()
{
    std::error_code ec;
    const auto size = fs::file_size(path_, ec);
    if (ec || size == 0) {
        return;
    }
    std::ifstream in(path_, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (!content.empty() && content.back() == '\n') {
        return;
    }
    const auto last_newline = content.rfind('\n');
    const auto keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    fs::resize_file(path_, keep);
}

void RecordLog::append(const json& record)
{
    std::lock_guard lock(mutex_);
    const bool created = !fs::exists(path_);
    if (created) {
        fs::create_directories(path_.parent_path());
    } else {
        drop_torn_tail();
    }
    const auto line = encode(record);
    Fd fd(::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644));
    if (fd.get() < 0) {
        raise_errno("open event log");
    }
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd.get(), line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            raise_errno("append event");
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd.get()) != 0) {
        raise_errno("fsync event log");
    }
    if (created) {
        fsync_dir(path_.parent_path());
    }
}

std::vector<json> RecordLog::read() const
{
    std::lock_guard lock(mutex_);
    std::vector<json> records;
    std::ifstream in(path_, std::ios::binary);
    if (!in) {
        return records;
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        const auto end = content.find('\n', pos);
        if (end == std::string::npos) {
            break; // torn tail: never acknowledged
        }
        ++line_no;
        const std::string_view line(content.data() + pos, end - pos);
        pos = end + 1;
        if (line.size() < 10 || line[8] != ' ') {
            throw Error(ErrorCode::StorageCorrupt, "malformed record " + std::to_string(line_no));
        }
        const auto body = line.substr(9);
        if (hex32(crc32_of(body)) != line.substr(0, 8)) {
            throw Error(ErrorCode::StorageCorrupt, "checksum mismatch in record " + std::to_string(line_no));
        }
        try {
            records.push_back(json::parse(body));
        } catch (const json::exception&) {
            throw Error(ErrorCode::StorageCorrupt, "unreadable record " + std::to_string(line_no));
        }
    }
    return records;
}

// ---- file store ----------------------------------------------------------

FileEventStore::FileEventStore(fs::path root) : root_(std::move(root))
{
    fs::create_directories(root_ / "documents");
    fs::create_directories(root_ / "conversations");
}

fs::path FileEventStore::document_log(const std::string& document_id) const
{
    if (!is_safe_id(document_id)) {
        throw Error(ErrorCode::InvalidArgument, "invalid document id");
    }
    return root_ / "documents" / (document_id + ".log");
}

void FileEventStore::append_revision(const std::string& document_id, const Revision& revision,
                                     const ChangePayload& payload)
{
    RecordLog(document_log(document_id)).append({{"revision", to_json(revision)}, {"payload", to_json(payload)}});
}

void FileEventStore::append_conversation_event(const std::string& document_id, const json& event)
{
    if (!is_safe_id(document_id)) {
        throw Error(ErrorCode::InvalidArgument, "invalid document id");
    }
    RecordLog(root_ / "conversations" / (document_id + ".log")).append(event);
}

void FileEventStore::append_account(const json& account) { RecordLog(root_ / "accounts.log").append(account); }

std::vector<std::string> FileEventStore::document_ids() const
{
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root_ / "documents")) {
        if (entry.path().extension() == ".log") {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

PlanDocument FileEventStore::load_document(const std::string& document_id) const
{
    const auto records = RecordLog(document_log(document_id)).read();
    History history;
    try {
        for (const auto& r : records) {
            history.revisions.push_back(revision_from_json(r.at("revision")));
            history.payloads.push_back(payload_from_json(r.at("payload")));
        }
        return replay(history);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::StorageCorrupt, "document " + document_id + " has an unreadable event");
    } catch (const Error& e) {
        if (e.code() == ErrorCode::StorageCorrupt) {
            throw;
        }
        throw Error(ErrorCode::StorageCorrupt, "document " + document_id + " failed replay: " + e.what());
    }
}

std::vector<json> FileEventStore::load_conversation(const std::string& document_id) const
{
    if (!is_safe_id(document_id)) {
        throw Error(ErrorCode::InvalidArgument, "invalid document id");
    }
    return RecordLog(root_ / "conversations" / (document_id + ".log")).read();
}

std::vector<json> FileEventStore::load_accounts() const { return RecordLog(root_ / "accounts.log").read(); }

} // namespace bizplan
