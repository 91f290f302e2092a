#include "qvr/subprocess_model.hpp"

#include "qvr/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <string>
#include <thread>
#include <unordered_map>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace qvr {

struct SubprocessModel::Child {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::string buffer;
    bool broken = false;
    std::mutex mutex;

    void terminate()
    {
        if (to_child >= 0) ::close(to_child);
        if (from_child >= 0) ::close(from_child);
        to_child = from_child = -1;
        if (pid > 0) {
            // Closing stdin is the polite shutdown; give the child a moment.
            // The shell may have forked the simulator, so signal the whole group.
            bool reaped = false;
            for (int i = 0; i < 50 && !reaped; ++i) {
                reaped = ::waitpid(pid, nullptr, WNOHANG) == pid;
                if (!reaped) std::this_thread::sleep_for(std::chrono::milliseconds(2));
            }
            ::kill(-pid, SIGKILL);
            if (!reaped) ::waitpid(pid, nullptr, 0);
            pid = -1;
        }
    }
};

namespace {

void spawn(const std::string& command, int& pid_out, int& in_fd,
           int& out_fd)
{
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
        throw ModelError(std::string("subprocess: pipe failed: ") + std::strerror(errno));
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw ModelError(std::string("subprocess: fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        ::setpgid(0, 0);
        std::signal(SIGPIPE, SIG_DFL);
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::setpgid(pid, pid);
    ::close(to_child[0]);
    ::close(from_child[1]);
    pid_out = pid;
    in_fd = to_child[1];
    out_fd = from_child[0];
}

void write_all(int fd, const std::string& data)
{
    std::size_t done = 0;
    while (done < data.size()) {
        const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw ModelError(std::string("subprocess: write failed: ") + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

}  // namespace

std::size_t SubprocessModel::KeyHash::operator()(const std::vector<std::uint64_t>& key) const
{
    std::uint64_t h = 0x84222325CBF29CE4ull;
    for (auto v : key) h = mix64(h ^ v);
    return static_cast<std::size_t>(h);
}

SubprocessModel::SubprocessModel(SubprocessOptions options) : options_(std::move(options))
{
    if (options_.command.empty()) throw std::invalid_argument("SubprocessModel: empty command");
    if (options_.dimension == 0 || options_.batch_size == 0 || options_.workers == 0) {
        throw std::invalid_argument(
            "SubprocessModel: dimension, batch_size and workers must be positive");
    }
    if (!(options_.timeout_seconds > 0.0)) {
        throw std::invalid_argument("SubprocessModel: timeout must be positive");
    }
    // A child that dies mid-write must surface as an error, not kill us.
    std::signal(SIGPIPE, SIG_IGN);
    for (std::size_t i = 0; i < options_.workers; ++i) {
        auto child = std::make_unique<Child>();
        int pid = -1;
        spawn(options_.command, pid, child->to_child, child->from_child);
        child->pid = pid;
        children_.push_back(std::move(child));
    }
}

SubprocessModel::~SubprocessModel()
{
    for (auto& child : children_) child->terminate();
}

double SubprocessModel::evaluate(std::span<const double> x) const
{
    PointSet one(options_.dimension);
    one.push_back(x);
    return evaluate_batch(one).front();
}

std::vector<double> SubprocessModel::evaluate_batch(const PointSet& xs) const
{
    if (xs.dim() != options_.dimension) {
        throw std::invalid_argument("SubprocessModel: expected points of dimension " +
                                    std::to_string(options_.dimension));
    }
    std::vector<double> out(xs.size());
    auto key_of = [&](std::size_t i) {
        std::vector<std::uint64_t> key(xs.dim());
        auto row = xs[i];
        for (std::size_t k = 0; k < row.size(); ++k) key[k] = std::bit_cast<std::uint64_t>(row[k]);
        return key;
    };

    // Cache hits, then one simulator request per distinct missing point.
    std::vector<std::size_t> misses;
    std::unordered_map<std::vector<std::uint64_t>, std::vector<std::size_t>, KeyHash> duplicates;
    {
        std::lock_guard lock(cache_mutex_);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            auto key = key_of(i);
            if (auto it = cache_.find(key); it != cache_.end()) {
                out[i] = it->second;
                continue;
            }
            auto& rows = duplicates[std::move(key)];
            if (rows.empty()) misses.push_back(i);
            rows.push_back(i);
        }
    }
    if (misses.empty()) return out;

    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t start = 0; start < misses.size(); start += options_.batch_size) {
        const std::size_t stop = std::min(misses.size(), start + options_.batch_size);
        chunks.emplace_back(misses.begin() + static_cast<std::ptrdiff_t>(start),
                            misses.begin() + static_cast<std::ptrdiff_t>(stop));
    }

    const std::size_t lanes = std::min(children_.size(), chunks.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(lanes);
    auto lane = [&](std::size_t k) {
        try {
            Child& child = *children_[k];
            std::lock_guard lock(child.mutex);
            for (std::size_t c = next++; c < chunks.size(); c = next++) {
                run_chunk(child, xs, chunks[c], out);
            }
        } catch (...) {
            failures[k] = std::current_exception();
        }
    };
    if (lanes == 1) {
        lane(0);
    } else {
        std::vector<std::thread> threads;
        for (std::size_t k = 0; k < lanes; ++k) threads.emplace_back(lane, k);
        for (auto& t : threads) t.join();
    }
    for (auto& failure : failures) {
        if (failure) std::rethrow_exception(failure);
    }

    std::lock_guard lock(cache_mutex_);
    for (std::size_t i : misses) {
        auto key = key_of(i);
        for (std::size_t row : duplicates[key]) out[row] = out[i];
        cache_.emplace(std::move(key), out[i]);
    }
    return out;
}

void SubprocessModel::run_chunk(Child& child, const PointSet& xs,
                                const std::vector<std::size_t>& rows,
                                std::vector<double>& out) const
{
    if (child.broken) throw ModelError("subprocess: simulator process is no longer usable");

    std::unordered_map<std::uint64_t, std::size_t> pending;
    std::string request;
    for (std::size_t row : rows) {
        const std::uint64_t id = next_id_++;
        pending.emplace(id, row);
        auto x = xs[row];
        nlohmann::json line = {{"id", id}, {"x", std::vector<double>(x.begin(), x.end())}};
        request += line.dump();
        request += '\n';
    }

    auto fail = [&](const std::string& what) {
        child.broken = true;
        child.terminate();
        throw ModelError("subprocess: " + what);
    };

    try {
        write_all(child.to_child, request);
    } catch (const ModelError& e) {
        fail(e.what());
    }
    calls_ += rows.size();

    using clock = std::chrono::steady_clock;
    const auto deadline =
        clock::now() + std::chrono::duration_cast<clock::duration>(
                           std::chrono::duration<double>(options_.timeout_seconds));
    char chunk[4096];
    while (!pending.empty()) {
        const auto newline = child.buffer.find('\n');
        if (newline == std::string::npos) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - clock::now());
            if (left.count() <= 0) fail("timed out waiting for simulator reply");
            pollfd pfd{child.from_child, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
            if (ready < 0) {
                if (errno == EINTR) continue;
                fail(std::string("poll failed: ") + std::strerror(errno));
            }
            if (ready == 0) fail("timed out waiting for simulator reply");
            const ssize_t n = ::read(child.from_child, chunk, sizeof chunk);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail(std::string("read failed: ") + std::strerror(errno));
            }
            if (n == 0) fail("simulator closed its output with requests outstanding");
            child.buffer.append(chunk, static_cast<std::size_t>(n));
            continue;
        }

        const std::string line = child.buffer.substr(0, newline);
        child.buffer.erase(0, newline + 1);
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            fail("malformed reply: " + line);
        }
        if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_unsigned()) {
            fail("reply without an unsigned integer id: " + line);
        }
        const auto id = reply["id"].get<std::uint64_t>();
        const auto it = pending.find(id);
        if (it == pending.end()) fail("reply for unknown or repeated id " + std::to_string(id));
        if (reply.contains("error")) {
            const std::string message =
                reply["error"].is_string() ? reply["error"].get<std::string>() : reply["error"].dump();
            // The child is still in sync; only this run is aborted.
            throw ModelError("simulator reported an error for id " + std::to_string(id) + ": " +
                             message);
        }
        if (reply.size() != 2 || !reply.contains("y") || !reply["y"].is_number()) {
            fail("reply must be exactly {\"id\", \"y\"}: " + line);
        }
        out[it->second] = reply["y"].get<double>();
        pending.erase(it);
    }
}

}  // namespace qvr
