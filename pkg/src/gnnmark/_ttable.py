# Upper quantiles of Student's t, integer df 1..200.
# Generated offline to 12 significant digits; do not edit by hand.

T_975 = (
    12.7062047364, 4.3026527297, 3.18244630528, 2.7764451052, 2.57058183564,
    2.44691185114, 2.36462425159, 2.3060041352, 2.26215716285, 2.22813885196,
    2.20098516008, 2.17881282966, 2.16036865646, 2.14478668792, 2.13144954556,
    2.11990529922, 2.10981557783, 2.10092204024, 2.09302405441, 2.08596344727,
    2.07961384473, 2.0738730679, 2.06865761042, 2.06389856163, 2.05953855275,
    2.05552943864, 2.05183051648, 2.0484071418, 2.04522964213, 2.0422724563,
    2.0395134464, 2.03693334346, 2.03451529745, 2.03224450932, 2.03010792825,
    2.02809400098, 2.02619246303, 2.02439416391, 2.02269092004, 2.02107539031,
    2.01954097044, 2.01808170282, 2.01669219923, 2.01536757444, 2.01410338888,
    2.01289559892, 2.01174051373, 2.01063475762, 2.00957523713, 2.0085591121,
    2.00758377032, 2.00664680506, 2.00574599532, 2.00487928819, 2.00404478329,
    2.00324071885, 2.00246545929, 2.00171748415, 2.00099537809, 2.00029782201,
    1.99962358499, 1.99897151703, 1.99834054252, 1.99772965432, 1.99713790839,
    1.99656441895, 1.99600835403, 1.99546893143, 1.99494541511, 1.99443711177,
    1.99394336785, 1.99346356666, 1.99299712589, 1.99254349518, 1.992102154,
    1.99167260964, 1.99125439539, 1.99084706881, 1.99045021023, 1.99006342125,
    1.98968632346, 1.98931855714, 1.98895978018, 1.98860966698, 1.98826790748,
    1.98793420624, 1.98760828159, 1.98728986483, 1.98697869951, 1.9866745407,
    1.98637715442, 1.98608631695, 1.98580181435, 1.98552344187, 1.98525100351,
    1.98498431153, 1.98472318603, 1.98446745443, 1.98421695151, 1.98397151845,
    1.98373100289, 1.9834952585, 1.98326414471, 1.98303752642, 1.98281527374,
    1.98259726171, 1.98238337012, 1.98217348326, 1.98196748969, 1.98176528209,
    1.98156675703, 1.98137181483, 1.98118035937, 1.98099229794, 1.98080754107,
    1.98062600242, 1.98044759865, 1.98027224924, 1.98009987643, 1.97993040505,
    1.97976376248, 1.97959987846, 1.97943868507, 1.97928011658, 1.9791241094,
    1.97897060197, 1.97881953468, 1.97867084982, 1.97852449146, 1.97838040543,
    1.97823853921, 1.97809884191, 1.97796126415, 1.97782575807, 1.97769227722,
    1.97756077654, 1.97743121229, 1.97730354201, 1.97717772448, 1.97705371964,
    1.97693148862, 1.97681099362, 1.97669219792, 1.97657506582, 1.97645956262,
    1.97634565458, 1.97623330888, 1.9761224936, 1.97601317768, 1.97590533089,
    1.97579892381, 1.97569392781, 1.975590315, 1.97548805823, 1.97538713105,
    1.9752875077, 1.97518916307, 1.9750920727, 1.97499621276, 1.97490155999,
    1.97480809174, 1.97471578592, 1.97462462096, 1.97453457585, 1.97444563009,
    1.97435776365, 1.97427095702, 1.97418519114, 1.97410044739, 1.97401670763,
    1.9739339541, 1.97385216949, 1.97377133688, 1.97369143975, 1.97361246195,
    1.9735343877, 1.97345720159, 1.97338088854, 1.97330543384, 1.97323082307,
    1.97315704216, 1.97308407733, 1.97301191513, 1.97294054239, 1.97286994621,
    1.97280011399, 1.97273103341, 1.97266269238, 1.9725950791, 1.972528182,
    1.97246198976, 1.97239649131, 1.97233167579, 1.97226753258, 1.97220405127,
    1.97214122166, 1.97207903378, 1.97201747783, 1.97195654425, 1.97189622363,
)

T_950 = (
    6.3137515148, 2.91998558036, 2.3533634348, 2.13184678633, 2.01504837333,
    1.94318028052, 1.89457860506, 1.85954803752, 1.83311293265, 1.81246112281,
    1.7958848187, 1.78228755565, 1.77093339599, 1.76131013577, 1.75305035569,
    1.74588367628, 1.73960672608, 1.73406360662, 1.72913281152, 1.72471824292,
    1.72074290281, 1.71714437438, 1.71387152775, 1.71088207991, 1.70814076125,
    1.70561791976, 1.70328844572, 1.70113093427, 1.69912702653, 1.69726088659,
    1.69551878255, 1.69388874838, 1.69236030903, 1.69092425519, 1.68957245778,
    1.68829771412, 1.6870936196, 1.68595446017, 1.68487512171, 1.68385101334,
    1.68287800213, 1.68195235747, 1.6810707032, 1.68022997657, 1.67942739265,
    1.67866041356, 1.67792672164, 1.67722419612, 1.67655089262, 1.67590502516,
    1.67528495042, 1.67468915373, 1.6741162367, 1.67356490635, 1.67303396529,
    1.67252230308, 1.67202888846, 1.67155276245, 1.6710930321, 1.6706488649,
    1.67021948377, 1.66980416251, 1.66940222171, 1.66901302502, 1.66863597585,
    1.66827051423, 1.66791611411, 1.6675722808, 1.66723854867, 1.66691447906,
    1.66659965833, 1.66629369613, 1.66599622377, 1.66570689273, 1.6654253734,
    1.66515135348, 1.66488453733, 1.66462464457, 1.6643714092, 1.66412457853,
    1.66388391287, 1.66364918398, 1.66342017487, 1.663196679, 1.66297849966,
    1.66276544937, 1.66255734937, 1.66235402913, 1.66215532583, 1.661961084,
    1.66177115503, 1.66158539687, 1.66140367364, 1.66122585527, 1.66105181725,
    1.6608814403, 1.6607146101, 1.66055121704, 1.660391156, 1.66023432607,
    1.66008063039, 1.65992997595, 1.65978227336, 1.65963743671, 1.65949538339,
    1.65935603393, 1.65921931187, 1.65908514358, 1.65895345819, 1.6588241874,
    1.65869726541, 1.65857262878, 1.65845021633, 1.65832996906, 1.65821183002,
    1.65809574426, 1.6579816587, 1.6578695221, 1.65775928493, 1.65765089935,
    1.65754431908, 1.6574394994, 1.65733639704, 1.65723497014, 1.6571351782,
    1.65703698198, 1.65694034354, 1.65684522608, 1.65675159398, 1.65665941271,
    1.65656864883, 1.65647926988, 1.6563912444, 1.6563045419, 1.65621913275,
    1.65613498824, 1.65605208049, 1.65597038243, 1.65588986777, 1.65581051099,
    1.65573228729, 1.65565517258, 1.65557914343, 1.65550417708, 1.65543025141,
    1.6553573449, 1.65528543661, 1.65521450618, 1.6551445338, 1.65507550018,
    1.65500738658, 1.65494017471, 1.65487384678, 1.65480838547, 1.65474377392,
    1.65467999567, 1.65461703471, 1.65455487544, 1.65449350263, 1.65443290146,
    1.65437305745, 1.65431395653, 1.65425558491, 1.6541979292, 1.65414097629,
    1.65408471343, 1.65402912813, 1.65397420824, 1.65391994188, 1.65386631745,
    1.65381332363, 1.65376094936, 1.65370918384, 1.65365801651, 1.65360743708,
    1.65355743545, 1.6535080018, 1.65345912649, 1.65341080012, 1.6533630135,
    1.65331575762, 1.6532690237, 1.65322280314, 1.65317708753, 1.65313186863,
    1.6530871384, 1.65304288895, 1.65299911257, 1.65295580173, 1.65291294902,
    1.65287054723, 1.65282858927, 1.65278706821, 1.65274597726, 1.65270530977,
    1.65266505923, 1.65262521926, 1.65258578362, 1.65254674617, 1.65250810091,
)
