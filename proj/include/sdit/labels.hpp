#ifndef SDIT_LABELS_HPP
#define SDIT_LABELS_HPP

#include <span>
#include <string>
#include <vector>

#include "sdit/tensor.hpp"

namespace sdit {

/// Domain index in {1..num_domains}.
struct DomainLabel {
  int index = 1;
  int num_domains = 1;

  DomainLabel() = default;
  DomainLabel(int idx, int count) : index(idx), num_domains(count) { validate(); }

  void validate() const {
    if (num_domains < 1 || index < 1 || index > num_domains) {
      throw DomainError("domain label " + std::to_string(index) + " outside 1.." +
                        std::to_string(num_domains));
    }
  }
  int zero_based() const { return index - 1; }
  bool operator==(const DomainLabel&) const = default;
};

inline void validate_labels(std::span<const DomainLabel> labels, int num_domains) {
  for (const DomainLabel& l : labels) {
    l.validate();
    if (l.num_domains != num_domains) {
      throw DomainError("label built for " + std::to_string(l.num_domains) +
                        " domains used with " + std::to_string(num_domains));
    }
  }
}

/// One-hot rows, shape (n, 1, 1, C).
template <typename Scalar>
Tensor<Scalar> one_hot(std::span<const DomainLabel> labels, int num_domains) {
  validate_labels(labels, num_domains);
  Tensor<Scalar> t(Shape{static_cast<Index>(labels.size()), 1, 1, num_domains});
  for (std::size_t i = 0; i < labels.size(); ++i) t.data(i, labels[i].zero_based()) = Scalar(1);
  return t;
}

/// One-hot label replicated over an h x w grid, shape (n, h, w, C).
template <typename Scalar>
Tensor<Scalar> label_planes(std::span<const DomainLabel> labels, int num_domains, Index h,
                            Index w) {
  validate_labels(labels, num_domains);
  Tensor<Scalar> t(Shape{static_cast<Index>(labels.size()), h, w, num_domains});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    t.sample_rows(static_cast<Index>(i)).col(labels[i].zero_based()).setOnes();
  }
  return t;
}

inline std::vector<DomainLabel> repeat_label(DomainLabel l, std::size_t n) {
  return std::vector<DomainLabel>(n, l);
}

}  // namespace sdit

#endif  // SDIT_LABELS_HPP
