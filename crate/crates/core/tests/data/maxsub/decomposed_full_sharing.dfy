function seqSum(ints: seq<int>): int {
  if |ints| == 0 then 0 else ints[0] + seqSum(ints[1..])
}

predicate IsMaxSubSum(ints: seq<int>, maxSum: int) {
  // a subarray exists with sum == maxSum (the empty one counts)
  (exists s, e :: 0 <= s <= e <= |ints| && seqSum(ints[s..e]) == maxSum) &&
  // all subarrays have sum <= maxSum
  (forall s, e :: 0 <= s < e <= |ints| ==> seqSum(ints[s..e]) <= maxSum)
}

method MaxSubImpl(ints: seq<int>) returns (maxSum: int)
  ensures IsMaxSubSum(ints, maxSum)
{
  maxSum := 0;
  for start := 0 to |ints| {
    maxSum := MaxSubImpl_loop1(ints, start, maxSum);
  }
  return maxSum;
}

method MaxSubImpl_loop1(ints: seq<int>, start: int, maxSum0: int) returns (maxSum: int)
  requires 0 <= start < |ints|
  requires exists s, e :: 0 <= s <= e <= |ints| && seqSum(ints[s..e]) == maxSum0
  requires forall s, e :: 0 <= s < start && s < e <= |ints| ==> seqSum(ints[s..e]) <= maxSum0
  ensures exists s, e :: 0 <= s <= e <= |ints| && seqSum(ints[s..e]) == maxSum
  ensures forall s, e :: 0 <= s <= start && s < e <= |ints| ==> seqSum(ints[s..e]) <= maxSum
{
  maxSum := maxSum0;
  var curr := 0;
  var slice := ints[start..];
  for end := 0 to |slice| {
    curr := curr + slice[end];
    maxSum := if curr > maxSum then curr else maxSum;
  }
}
