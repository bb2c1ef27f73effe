function seqSum(ints: seq<int>): int {
  if |ints| == 0 then 0 else ints[0] + seqSum(ints[1..])
}

predicate IsMaxSubSum(ints: seq<int>, maxSum: int) {
  // a subarray exists with sum == maxSum (the empty one counts)
  (exists s, e :: 0 <= s <= e <= |ints| && seqSum(ints[s..e]) == maxSum) &&
  // all subarrays have sum <= maxSum
  (forall s, e :: 0 <= s < e <= |ints| ==> seqSum(ints[s..e]) <= maxSum)
}

lemma lemmaSeqSumExtend(ints: seq<int>)
  requires |ints| > 1
  ensures seqSum(ints) == seqSum(ints[..|ints|-1]) + ints[|ints|-1]
{
  if |ints| > 2 {
    lemmaSeqSumExtend(ints[1..]);
    assert ints[1..][..|ints|-2] == ints[1..|ints|-1];
  }
}

method MaxSubImpl(ints: seq<int>) returns (maxSum: int)
  ensures IsMaxSubSum(ints, maxSum)
{
  maxSum := 0;
  assert seqSum(ints[0..0]) == 0;
  for start := 0 to |ints|
    invariant exists s, e :: 0 <= s <= e <= |ints| && seqSum(ints[s..e]) == maxSum
    invariant forall s, e :: 0 <= s < start && s < e <= |ints| ==> seqSum(ints[s..e]) <= maxSum
  {
    var best := MaxSubImpl_loop1(ints, start);
    maxSum := if best > maxSum then best else maxSum;
  }
  return maxSum;
}

method MaxSubImpl_loop1(ints: seq<int>, start: int) returns (best: int)
  requires 0 <= start < |ints|
  ensures exists e :: start <= e <= |ints| && seqSum(ints[start..e]) == best
  ensures forall e :: start < e <= |ints| ==> seqSum(ints[start..e]) <= best
{
  best := 0;
  var curr := 0;
  var slice := ints[start..];
  assert seqSum(ints[start..start]) == 0;
  for end := 0 to |slice|
    invariant curr == seqSum(slice[..end])
    invariant exists e :: start <= e <= |ints| && seqSum(ints[start..e]) == best
    invariant forall e :: start < e <= start + end ==> seqSum(ints[start..e]) <= best
  {
    assert slice[..end+1][..|slice[..end+1]|-1] == slice[..end];
    if end > 0 {
      lemmaSeqSumExtend(slice[..end+1]);
    }
    assert slice[..end+1] == ints[start..start+end+1];
    curr := curr + slice[end];
    best := if curr > best then curr else best;
  }
}
