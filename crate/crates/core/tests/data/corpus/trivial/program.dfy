function Double(n: nat): nat { 2 * n }

lemma DoubleIsEven(n: nat)
  ensures Double(n) % 2 == 0
{
}
