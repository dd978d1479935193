#include "dmp/pubsub.hpp"

#include "dmp/error.hpp"

namespace dmp::pubsub {

namespace {

std::vector<std::string> split_levels(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find('/', start);
    out.emplace_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join_levels(const std::vector<std::string>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '/';
    out += segments[i];
  }
  return out;
}

bool has_wildcard_char(std::string_view s) {
  return s.find_first_of("+#") != std::string_view::npos;
}

}  // namespace

TopicName TopicName::parse(std::string_view text) {
  if (text.empty()) throw Error(Errc::InvalidTopic, "empty topic");
  TopicName name;
  name.segments_ = split_levels(text);
  for (const auto& seg : name.segments_) {
    if (seg.empty() || has_wildcard_char(seg)) throw Error(Errc::InvalidTopic, std::string(text));
  }
  return name;
}

std::string TopicName::str() const { return join_levels(segments_); }

TopicFilter TopicFilter::parse(std::string_view text) {
  if (text.empty()) throw Error(Errc::InvalidFilter, "empty filter");
  TopicFilter filter;
  filter.segments_ = split_levels(text);
  const auto n = filter.segments_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seg = filter.segments_[i];
    if (seg == "+") continue;
    if (seg == "#") {
      if (i + 1 != n) throw Error(Errc::InvalidFilter, std::string(text));
      continue;
    }
    if (seg.empty() || has_wildcard_char(seg)) throw Error(Errc::InvalidFilter, std::string(text));
  }
  return filter;
}

std::string TopicFilter::str() const { return join_levels(segments_); }

bool matches(const TopicFilter& filter, const TopicName& topic) {
  const auto& f = filter.segments();
  const auto& t = topic.segments();
  std::size_t i = 0;
  for (; i < f.size(); ++i) {
    if (f[i] == "#") return true;
    if (i >= t.size()) return false;
    if (f[i] != "+" && f[i] != t[i]) return false;
  }
  return i == t.size();
}

TopicName raw_result_topic(Layer layer, std::string_view producer, std::string_view av_source_id) {
  std::string text = "inference/";
  text += to_string(layer);
  text += '/';
  text += producer;
  text += '/';
  text += av_source_id;
  return TopicName::parse(text);
}

SubscriptionHandle EdgeBroker::subscribe(const TopicFilter& filter, std::string subscriber) {
  std::lock_guard lock(mutex_);
  for (const auto& [handle, sub] : subscriptions_) {
    if (sub.subscriber == subscriber && sub.filter == filter) {
      throw Error(Errc::DuplicateSubscription, subscriber + " " + filter.str());
    }
  }
  const auto handle = next_handle_++;
  subscriptions_.emplace(handle, Subscription{filter, std::move(subscriber), {}});
  return handle;
}

void EdgeBroker::unsubscribe(SubscriptionHandle handle) {
  std::lock_guard lock(mutex_);
  if (subscriptions_.erase(handle) == 0) {
    throw Error(Errc::UnknownSubscription, std::to_string(handle));
  }
}

std::size_t EdgeBroker::publish(const TopicName& topic, Bytes payload, std::string publisher) {
  std::lock_guard lock(mutex_);
  const auto sequence = next_sequence_++;
  std::size_t delivered = 0;
  for (auto& [handle, sub] : subscriptions_) {
    if (!matches(sub.filter, topic)) continue;
    sub.queue.push_back(Message{topic, payload, publisher, sequence});
    ++delivered;
  }
  return delivered;
}

std::vector<Message> EdgeBroker::poll(SubscriptionHandle handle, std::size_t max) {
  std::lock_guard lock(mutex_);
  const auto it = subscriptions_.find(handle);
  if (it == subscriptions_.end()) throw Error(Errc::UnknownSubscription, std::to_string(handle));
  auto& queue = it->second.queue;
  std::vector<Message> out;
  while (!queue.empty() && out.size() < max) {
    out.push_back(std::move(queue.front()));
    queue.pop_front();
  }
  return out;
}

std::size_t EdgeBroker::pending(SubscriptionHandle handle) const {
  std::lock_guard lock(mutex_);
  const auto it = subscriptions_.find(handle);
  if (it == subscriptions_.end()) throw Error(Errc::UnknownSubscription, std::to_string(handle));
  return it->second.queue.size();
}

std::size_t EdgeBroker::pending_total() const {
  std::lock_guard lock(mutex_);
  std::size_t total = 0;
  for (const auto& [handle, sub] : subscriptions_) total += sub.queue.size();
  return total;
}

}  // namespace dmp::pubsub
