#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmp/entity.hpp"

namespace dmp::pubsub {

/// Concrete topic such as "inference/edge/video-analyzer/cam1".
class TopicName {
 public:
  /// Throws Error(InvalidTopic) on empty levels or wildcard characters.
  static TopicName parse(std::string_view text);

  const std::vector<std::string>& segments() const { return segments_; }
  std::string str() const;

  friend bool operator==(const TopicName&, const TopicName&) = default;

 private:
  std::vector<std::string> segments_;
};

/// MQTT-style filter: literal levels, "+" for exactly one level, and a
/// trailing "#" for the remaining levels (including none).
class TopicFilter {
 public:
  /// Throws Error(InvalidFilter).
  static TopicFilter parse(std::string_view text);

  const std::vector<std::string>& segments() const { return segments_; }
  std::string str() const;

  friend bool operator==(const TopicFilter&, const TopicFilter&) = default;

 private:
  std::vector<std::string> segments_;
};

bool matches(const TopicFilter& filter, const TopicName& topic);

/// "inference/<layer>/<producer>/<av_source_id>"
TopicName raw_result_topic(Layer layer, std::string_view producer, std::string_view av_source_id);

struct Message {
  TopicName topic;
  Bytes payload;
  std::string publisher;
  std::uint64_t sequence = 0;  // broker-wide publish order
};

using SubscriptionHandle = std::uint64_t;

/// In-process broker for one layer. All commands are serialized through an
/// internal mutex, so several producers may publish concurrently; the
/// observable order is the lock acquisition order.
class EdgeBroker {
 public:
  /// Throws Error(DuplicateSubscription) if `subscriber` already holds an
  /// identical filter. Only messages published afterwards are delivered.
  SubscriptionHandle subscribe(const TopicFilter& filter, std::string subscriber);
  void unsubscribe(SubscriptionHandle handle);

  /// Returns the number of subscriptions the payload was enqueued to.
  std::size_t publish(const TopicName& topic, Bytes payload, std::string publisher = {});

  /// Removes and returns up to `max` pending messages for the subscription.
  std::vector<Message> poll(SubscriptionHandle handle,
                            std::size_t max = static_cast<std::size_t>(-1));
  std::size_t pending(SubscriptionHandle handle) const;
  std::size_t pending_total() const;

 private:
  struct Subscription {
    TopicFilter filter;
    std::string subscriber;
    std::deque<Message> queue;
  };

  mutable std::mutex mutex_;
  std::map<SubscriptionHandle, Subscription> subscriptions_;
  SubscriptionHandle next_handle_ = 1;
  std::uint64_t next_sequence_ = 0;
};

}  // namespace dmp::pubsub
