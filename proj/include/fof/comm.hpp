#pragma once

#include <atomic>
#include <bit>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "fof/types.hpp"

namespace fof::dist {

using Bytes = std::vector<std::uint8_t>;

/// Mismatched collectives, truncated packets, transport failures.
class ProtocolError : public Error {
public:
  using Error::Error;
};

// Little-endian wire encoding.
class ByteWriter {
public:
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  Bytes take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

private:
  Bytes buf_;
};

class ByteReader {
public:
  explicit ByteReader(const Bytes& b) : data_(b.data()), size_(b.size()) {}

  std::uint64_t u64() {
    if (size_ - pos_ < 8)
      throw ProtocolError("malformed packet: truncated field at byte " + std::to_string(pos_));
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k)
      v |= static_cast<std::uint64_t>(data_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  bool done() const { return pos_ == size_; }
  std::size_t remaining() const { return size_ - pos_; }

private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

/// A rank's view of a group of R cooperating ranks. Point-to-point messages
/// between a given pair of ranks arrive in send order. Collectives are built
/// on top and must be entered by every rank in the same sequence; each one
/// stamps its messages with a sequence tag so a mismatch is reported rather
/// than silently consuming the wrong data.
class Communicator {
public:
  virtual ~Communicator() = default;

  virtual int rank() const = 0;
  virtual int size() const = 0;
  virtual void send(int dest, std::uint64_t tag, Bytes payload) = 0;
  virtual Bytes recv(int src, std::uint64_t tag) = 0;

  /// Every rank's payload, indexed by rank.
  std::vector<Bytes> allgather(const Bytes& mine) {
    const std::uint64_t tag = next_tag(kAllgather);
    for (int q = 0; q < size(); ++q)
      if (q != rank())
        send(q, tag, mine);
    std::vector<Bytes> out(static_cast<std::size_t>(size()));
    for (int q = 0; q < size(); ++q)
      out[q] = q == rank() ? mine : recv(q, tag);
    return out;
  }

  /// Sends outgoing[q] to every rank q and returns what each rank sent here.
  std::vector<Bytes> alltoall(std::vector<Bytes> outgoing) {
    if (outgoing.size() != static_cast<std::size_t>(size()))
      throw ProtocolError("alltoall needs one payload per rank");
    const std::uint64_t tag = next_tag(kAlltoall);
    for (int q = 0; q < size(); ++q)
      if (q != rank())
        send(q, tag, std::move(outgoing[q]));
    std::vector<Bytes> in(static_cast<std::size_t>(size()));
    for (int q = 0; q < size(); ++q)
      in[q] = q == rank() ? std::move(outgoing[q]) : recv(q, tag);
    return in;
  }

  /// Inclusive prefix sum over ranks 0..rank().
  std::uint64_t scan_sum(std::uint64_t value) {
    ByteWriter w;
    w.u64(value);
    const auto all = allgather(w.take());
    std::uint64_t sum = 0;
    for (int q = 0; q <= rank(); ++q) {
      ByteReader r(all[q]);
      sum += r.u64();
    }
    return sum;
  }

  void barrier() { (void)allgather({}); }

protected:
  static constexpr std::uint64_t kAllgather = 1;
  static constexpr std::uint64_t kAlltoall = 2;

  std::uint64_t next_tag(std::uint64_t kind) { return (kind << 56) | ++sequence_; }

private:
  std::uint64_t sequence_ = 0;
};

/// Shared state for R ranks running as threads of one process.
class InProcessWorld {
public:
  explicit InProcessWorld(int ranks, std::chrono::milliseconds timeout = std::chrono::minutes(5))
      : ranks_(ranks), timeout_(timeout), boxes_(static_cast<std::size_t>(ranks)) {
    if (ranks < 1)
      throw Error("rank count must be at least 1");
    for (auto& b : boxes_) {
      b = std::make_unique<Mailbox>();
      b->from.resize(static_cast<std::size_t>(ranks));
    }
  }

  int size() const { return ranks_; }

  void post(int src, int dest, std::uint64_t tag, Bytes payload) {
    check_rank(dest);
    auto& box = *boxes_[dest];
    {
      std::lock_guard lock(box.mutex);
      box.from[src].push_back({tag, std::move(payload)});
    }
    box.ready.notify_all();
  }

  Bytes take(int src, int dest, std::uint64_t tag) {
    check_rank(src);
    auto& box = *boxes_[dest];
    std::unique_lock lock(box.mutex);
    auto& queue = box.from[src];
    const bool arrived =
        box.ready.wait_for(lock, timeout_, [&] { return !queue.empty() || aborted_.load(); });
    if (aborted_)
      throw ProtocolError("communication aborted by a failing rank");
    if (!arrived)
      throw ProtocolError("timed out waiting for rank " + std::to_string(src));
    Message m = std::move(queue.front());
    queue.pop_front();
    if (m.tag != tag)
      throw ProtocolError("protocol mismatch: rank " + std::to_string(dest) + " expected tag " +
                          std::to_string(tag) + " from rank " + std::to_string(src) + ", got " +
                          std::to_string(m.tag));
    return std::move(m.payload);
  }

  void abort() {
    aborted_ = true;
    for (auto& b : boxes_) {
      std::lock_guard lock(b->mutex);
      b->ready.notify_all();
    }
  }

private:
  struct Message {
    std::uint64_t tag;
    Bytes payload;
  };
  struct Mailbox {
    std::mutex mutex;
    std::condition_variable ready;
    std::vector<std::deque<Message>> from;
  };

  void check_rank(int r) const {
    if (r < 0 || r >= ranks_)
      throw ProtocolError("rank " + std::to_string(r) + " out of range");
  }

  int ranks_;
  std::chrono::milliseconds timeout_;
  std::vector<std::unique_ptr<Mailbox>> boxes_;
  std::atomic<bool> aborted_{false};
};

class InProcessComm final : public Communicator {
public:
  InProcessComm(InProcessWorld& world, int rank) : world_(world), rank_(rank) {}

  int rank() const override { return rank_; }
  int size() const override { return world_.size(); }
  void send(int dest, std::uint64_t tag, Bytes payload) override {
    world_.post(rank_, dest, tag, std::move(payload));
  }
  Bytes recv(int src, std::uint64_t tag) override { return world_.take(src, rank_, tag); }

private:
  InProcessWorld& world_;
  int rank_;
};

/// Runs body(comm) on `ranks` threads sharing one in-process world. If any
/// rank throws, the others are woken and the first exception is rethrown
/// after all threads have joined.
inline void run_ranks(int ranks, const std::function<void(Communicator&)>& body) {
  InProcessWorld world(ranks);
  std::mutex failure_mutex;
  std::exception_ptr failure;
  {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(ranks));
    for (int r = 0; r < ranks; ++r)
      threads.emplace_back([&, r] {
        InProcessComm comm(world, r);
        try {
          body(comm);
        } catch (...) {
          {
            std::lock_guard lock(failure_mutex);
            if (!failure)
              failure = std::current_exception();
          }
          world.abort();
        }
      });
  }
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace fof::dist
