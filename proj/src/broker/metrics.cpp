#include "rivulet/broker/metrics.hpp"

#include <fstream>

namespace rivulet::broker {

namespace {

constexpr wire::MsgType kAllTypes[] = {
    wire::MsgType::Append,         wire::MsgType::AppendAck,   wire::MsgType::Pull,
    wire::MsgType::PullReply,      wire::MsgType::SubscribePush, wire::MsgType::SubscribeAck,
    wire::MsgType::ConsumedNotify, wire::MsgType::Replicate,   wire::MsgType::ReplicateAck,
    wire::MsgType::Error,
};

}  // namespace

MetricsCsvWriter::MetricsCsvWriter(const BrokerMetrics& metrics, std::string path)
    : metrics_(metrics), path_(std::move(path)) {
  thread_ = std::thread([this] { run(); });
}

MetricsCsvWriter::~MetricsCsvWriter() { stop(); }

void MetricsCsvWriter::stop() {
  if (!running_.exchange(false)) return;
  if (thread_.joinable()) thread_.join();
}

void MetricsCsvWriter::run() {
  std::ofstream out(path_, std::ios::trunc);
  out << "second,msg_type,count\n";
  out.flush();

  std::map<wire::MsgType, std::uint64_t> last;
  std::uint32_t second = 0;
  while (running_.load(std::memory_order_relaxed)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (metrics_.current_second() <= second) continue;
    for (wire::MsgType t : kAllTypes) {
      const std::uint64_t now = metrics_.rpcs(t);
      const std::uint64_t delta = now - last[t];
      if (delta > 0) {
        out << second << ',' << wire::msg_type_name(t) << ',' << delta << '\n';
      }
      last[t] = now;
    }
    out.flush();
    ++second;
  }
}

}  // namespace rivulet::broker
